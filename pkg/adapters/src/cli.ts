#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { chunkCorpus } from "./chunkCorpus.js";
import { BlobDetector, detectFrames } from "./detectFrames.js";
import { readJsonl, writeJsonl } from "./jsonl.js";
import { corpusRecordSchema, type CorpusRecord } from "./schemas.js";
import { serve } from "./scoreSentences.js";

function loadCorpus(path: string): CorpusRecord[] {
  return readJsonl(path).map(({ lineNo, record }) => {
    const parsed = corpusRecordSchema.safeParse(record);
    if (!parsed.success) {
      throw new Error(`${path}:${lineNo}: bad corpus record: ${parsed.error.issues[0]?.message}`);
    }
    return parsed.data;
  });
}

await yargs(hideBin(process.argv))
  .scriptName("navaug-adapters")
  .command(
    "detect-frames",
    "scan a directory of <video_id>_<frame_index>.png frames and write detections JSONL",
    (y) =>
      y
        .option("images", { type: "string", demandOption: true, describe: "frame directory" })
        .option("out", { type: "string", demandOption: true, describe: "output JSONL path" })
        .option("threshold", { type: "number", default: 0.12 })
        .option("min-area", { type: "number", default: 16 }),
    (args) => {
      const detector = new BlobDetector({ threshold: args.threshold, minArea: args.minArea });
      const { records, framesRead, framesSkipped } = detectFrames(args.images, detector);
      writeJsonl(args.out, records);
      process.stderr.write(
        `${records.length} detections from ${framesRead} frames (${framesSkipped} skipped)\n`,
      );
    },
  )
  .command(
    "chunk-corpus",
    "annotate corpus sentences with noun-phrase and direction-word spans",
    (y) =>
      y
        .option("corpus", { type: "string", demandOption: true, describe: "corpus JSONL path" })
        .option("out", { type: "string", demandOption: true, describe: "output JSONL path" }),
    (args) => {
      const records = chunkCorpus(loadCorpus(args.corpus));
      writeJsonl(args.out, records);
      process.stderr.write(`${records.length} sentences annotated\n`);
    },
  )
  .command(
    "score-sentences",
    "read sentences from stdin, write one loss per line to stdout",
    (y) => y,
    async () => {
      await serve(process.stdin, process.stdout);
    },
  )
  .demandCommand(1, "pick a subcommand")
  .strict()
  .fail((msg, err) => {
    process.stderr.write(`error: ${msg ?? err?.message}\n`);
    process.exit(1);
  })
  .parseAsync();
