/**
 * Sentence-loss scorer for the line protocol: one sentence per input
 * line, one finite decimal (or the sentinel "NaN") per output line, in
 * order, flushed per line so the consumer can stream.
 *
 * Losses come from a word-bigram model with add-one smoothing, fitted at
 * load time to the embedded seed text below. That is a deliberately tiny
 * stand-in for a neural LM: it is deterministic, needs no downloads, and
 * still prefers grammatical word order over scrambles of the same words
 * because only the former hits seed bigrams.
 */
import { tokenize } from "./tokenize.js";

const BOS = "<s>";
const EOS = "</s>";
const UNK = "<unk>";

const SEED_TEXT = `
walk forward to the door . go forward past the bench . turn left at the corner .
turn right at the red door . walk to the stop sign and stop . stop at the gate .
turn left after the staircase . turn right before the window . go straight and stop .
walk forward along the hallway . turn left near the plant . stop near the table .
go forward until you reach the elevator . turn right at the end of the hall .
walk past the chairs and turn left . stop in front of the painting .
turn left at the lamp . walk forward through the doorway . stop by the desk .
head forward to the railing . turn right past the shelf . go to the couch and stop .
walk toward the mirror . turn left and go forward . turn right and stop .
stop when you reach the rug . go forward and turn left at the pillar .
walk up the stairs and stop . turn right at the counter . go past the sign .
walk forward and stop at the bed . turn left toward the kitchen .
go forward past the refrigerator . walk to the sofa and turn right .
stop beside the cabinet . turn left at the fireplace . walk forward into the room .
go down the hallway and stop . turn right near the doorway . stop at the window .
walk straight to the table . turn left at the bookshelf . go forward and stop there .
wait by the door . walk out of the room and turn right . go through the gate .
turn left into the corridor . stop next to the bench . walk around the corner .
go forward a little and stop . take a left at the stairs . take a right at the sign .
`;

type BigramCounts = Map<string, Map<string, number>>;

interface BigramModel {
  counts: BigramCounts;
  totals: Map<string, number>;
  vocabSize: number;
  vocab: Set<string>;
}

function fit(text: string): BigramModel {
  const counts: BigramCounts = new Map();
  const totals = new Map<string, number>();
  const vocab = new Set<string>([BOS, EOS, UNK]);
  const sentences: string[][] = [];
  let current: string[] = [];
  for (const token of tokenize(text.toLowerCase())) {
    current.push(token);
    if (token === ".") {
      sentences.push(current);
      current = [];
    }
  }
  if (current.length > 0) sentences.push(current);
  for (const sentence of sentences) {
    const seq = [BOS, ...sentence, EOS];
    for (const token of seq) vocab.add(token);
    for (let i = 0; i + 1 < seq.length; i++) {
      const a = seq[i]!;
      const b = seq[i + 1]!;
      let row = counts.get(a);
      if (!row) counts.set(a, (row = new Map()));
      row.set(b, (row.get(b) ?? 0) + 1);
      totals.set(a, (totals.get(a) ?? 0) + 1);
    }
  }
  return { counts, totals, vocabSize: vocab.size, vocab };
}

const MODEL = fit(SEED_TEXT);

/** Mean negative log bigram probability; NaN for lines with no tokens. */
export function sentenceLoss(line: string): number {
  const tokens = tokenize(line.toLowerCase()).map((t) => (MODEL.vocab.has(t) ? t : UNK));
  if (tokens.length === 0) return NaN;
  const seq = [BOS, ...tokens, EOS];
  let total = 0;
  for (let i = 0; i + 1 < seq.length; i++) {
    const a = seq[i]!;
    const b = seq[i + 1]!;
    const joint = MODEL.counts.get(a)?.get(b) ?? 0;
    const marginal = MODEL.totals.get(a) ?? 0;
    total += -Math.log((joint + 1) / (marginal + MODEL.vocabSize));
  }
  return total / (seq.length - 1);
}

export function formatLoss(loss: number): string {
  return Number.isFinite(loss) ? loss.toFixed(6) : "NaN";
}

/** Serve the protocol over the given streams until input ends. */
export async function serve(
  input: NodeJS.ReadableStream,
  output: NodeJS.WritableStream,
): Promise<void> {
  const { createInterface } = await import("node:readline");
  const lines = createInterface({ input, crlfDelay: Infinity });
  for await (const line of lines) {
    let reply: string;
    try {
      reply = formatLoss(sentenceLoss(line));
    } catch {
      reply = "NaN";
    }
    output.write(reply + "\n");
  }
}
