/**
 * Rule-based noun-phrase and direction-word chunker.
 *
 * Stands in for a parser model: the output format is the contract, the
 * linguistics is a heuristic. Direction words get single-token spans;
 * noun phrases are content-token runs introduced by a determiner, with
 * the determiner left outside the span. Overlaps between the two span
 * sources are resolved longest-first and the result is verified
 * non-overlapping before it is emitted.
 */
import { annotationRecordSchema, type AnnotationRecord, type SpanKind } from "./schemas.js";
import { splitSentences } from "./tokenize.js";

export interface SpanCandidate {
  start: number;
  end: number; // exclusive
  kind: SpanKind;
}

const DIRECTION_WORDS = new Set(["left", "right", "forward", "stop"]);

const DETERMINERS = new Set([
  "the", "a", "an", "this", "that", "these", "those",
  "your", "my", "his", "her", "its", "their", "our",
]);

// Function words and bare verbs/adverbs that never sit inside an object
// noun phrase. Anything else following a determiner is treated as NP
// material, including direction words ("the left door").
const NON_NP_WORDS = new Set([
  ...DETERMINERS,
  "at", "on", "in", "to", "of", "by", "with", "from", "into", "onto",
  "near", "past", "toward", "towards", "until", "behind", "before",
  "after", "over", "under", "along", "across", "around", "beside",
  "between", "through", "up", "down", "out", "off",
  "and", "or", "but", "then", "when", "while", "if",
  "you", "i", "it", "we", "they", "he", "she",
  "go", "walk", "turn", "take", "keep", "continue", "head", "move",
  "proceed", "stay", "wait", "make", "reach", "see", "is", "are", "be",
  "will", "should",
  "straight", "slightly", "immediately", "just", "there", "here",
  "now", "again",
]);

const PUNCT = new Set([".", "!", "?", ",", ";", ":"]);

function isNpWord(token: string): boolean {
  const lower = token.toLowerCase();
  return !PUNCT.has(lower) && !NON_NP_WORDS.has(lower);
}

/** All candidate spans for one sentence, possibly overlapping. */
export function proposeSpans(tokens: string[]): SpanCandidate[] {
  const candidates: SpanCandidate[] = [];
  for (let i = 0; i < tokens.length; i++) {
    if (DIRECTION_WORDS.has(tokens[i]!.toLowerCase())) {
      candidates.push({ start: i, end: i + 1, kind: "DIRECTION_WORD" });
    }
  }
  for (let i = 0; i < tokens.length; i++) {
    if (!DETERMINERS.has(tokens[i]!.toLowerCase())) continue;
    let j = i + 1;
    while (j < tokens.length && isNpWord(tokens[j]!)) j++;
    if (j > i + 1) {
      candidates.push({ start: i + 1, end: j, kind: "NOUN_PHRASE" });
    }
  }
  return candidates;
}

/**
 * Greedy longest-first selection. Ties go to DIRECTION_WORD (losing the
 * direction word to a mask makes the sentence useless downstream), then
 * to the earlier span. Throws if the result still overlaps; that would
 * be a bug here, not bad input.
 */
export function resolveOverlaps(candidates: SpanCandidate[]): SpanCandidate[] {
  const ranked = [...candidates].sort((a, b) => {
    const lenDiff = (b.end - b.start) - (a.end - a.start);
    if (lenDiff !== 0) return lenDiff;
    if (a.kind !== b.kind) return a.kind === "DIRECTION_WORD" ? -1 : 1;
    return a.start - b.start;
  });
  const accepted: SpanCandidate[] = [];
  for (const cand of ranked) {
    const clash = accepted.some((s) => cand.start < s.end && s.start < cand.end);
    if (!clash) accepted.push(cand);
  }
  accepted.sort((a, b) => a.start - b.start);
  let prevEnd = 0;
  for (const span of accepted) {
    if (span.start < prevEnd) {
      throw new Error(`overlap survived resolution at token ${span.start}`);
    }
    prevEnd = span.end;
  }
  return accepted;
}

export function annotateSentence(sentenceId: string, tokens: string[]): AnnotationRecord {
  const spans = resolveOverlaps(proposeSpans(tokens));
  const record = {
    sentence_id: sentenceId,
    tokens,
    spans: spans.map((s) => [s.start, s.end, s.kind] as [number, number, SpanKind]),
  };
  return annotationRecordSchema.parse(record);
}

/** One annotation record per sentence, ids `<corpus id>#<sentence index>`. */
export function chunkCorpus(corpus: Array<{ id: string; text: string }>): AnnotationRecord[] {
  const out: AnnotationRecord[] = [];
  for (const { id, text } of corpus) {
    const sentences = splitSentences(text);
    for (let k = 0; k < sentences.length; k++) {
      out.push(annotateSentence(`${id}#${k}`, sentences[k]!));
    }
  }
  return out;
}
