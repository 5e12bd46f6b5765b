/** Reversible word-level tokenizer.
 *
 * A token is a word with its leading whitespace attached (plus one tail
 * token for trailing whitespace), so the token strings partition the
 * input exactly and decode(encode(x)) === x for any x. Ids are assigned
 * in first-seen order and the vocabulary round-trips through JSON.
 */

const WORD = /\s*\S+/g;

export function splitText(text: string): string[] {
  const out: string[] = text.match(WORD) ?? [];
  let covered = 0;
  for (const t of out) covered += t.length;
  if (covered < text.length) out.push(text.slice(covered));
  return out;
}

export class Tokenizer {
  private readonly ids = new Map<string, number>();
  private readonly pieces: string[] = [];

  get vocabSize(): number {
    return this.pieces.length;
  }

  encode(text: string): number[] {
    return splitText(text).map((piece) => {
      let id = this.ids.get(piece);
      if (id === undefined) {
        id = this.pieces.length;
        this.ids.set(piece, id);
        this.pieces.push(piece);
      }
      return id;
    });
  }

  decode(tokenIds: readonly number[]): string {
    return tokenIds
      .map((id) => {
        const piece = this.pieces[id];
        if (piece === undefined) throw new Error(`unknown token id ${id}`);
        return piece;
      })
      .join("");
  }

  toJSON(): { pieces: string[] } {
    return { pieces: this.pieces.slice() };
  }

  static fromJSON(data: { pieces: string[] }): Tokenizer {
    const tok = new Tokenizer();
    for (const piece of data.pieces) {
      tok.ids.set(piece, tok.pieces.length);
      tok.pieces.push(piece);
    }
    return tok;
  }
}
