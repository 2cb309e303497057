/**
 * Tokenization that byte-for-byte matches how navaug reads corpus text:
 * whitespace tokens, with one trailing sentence punctuation mark split off.
 * The chunker must agree with that reading or its span indices are garbage.
 */

const SENTENCE_PUNCT = new Set([".", "!", "?"]);

export function tokenize(text: string): string[] {
  const tokens: string[] = [];
  for (const raw of text.split(/\s+/)) {
    if (raw.length === 0) continue;
    const last = raw[raw.length - 1]!;
    if (raw.length > 1 && SENTENCE_PUNCT.has(last)) {
      tokens.push(raw.slice(0, -1));
      tokens.push(last);
    } else {
      tokens.push(raw);
    }
  }
  return tokens;
}

/** Token sequences split after each sentence-final punctuation token. */
export function splitSentences(text: string): string[][] {
  const sentences: string[][] = [];
  let current: string[] = [];
  for (const token of tokenize(text)) {
    current.push(token);
    if (SENTENCE_PUNCT.has(token)) {
      sentences.push(current);
      current = [];
    }
  }
  if (current.length > 0) sentences.push(current);
  return sentences;
}
