/**
 * JSONL record schemas, matching what the navaug loaders accept.
 *
 * Every record an adapter writes is validated against these first, so a
 * bug here shows up as a loud local error instead of a downstream warning.
 */
import { z } from "zod";

const finite = z.number().finite();

export const detectionRecordSchema = z.object({
  video_id: z.string().min(1),
  frame_index: z.number().int().nonnegative(),
  class_name: z.string().min(1),
  confidence: finite.min(0).max(1),
  // x, y, w, h in pixels; zero-area boxes are rejected downstream
  bbox: z.tuple([finite.nonnegative(), finite.nonnegative(), finite.positive(), finite.positive()]),
});

export type DetectionRecord = z.infer<typeof detectionRecordSchema>;

export const spanKindSchema = z.enum(["NOUN_PHRASE", "DIRECTION_WORD"]);

export type SpanKind = z.infer<typeof spanKindSchema>;

const spanSchema = z.tuple([
  z.number().int().nonnegative(),
  z.number().int().positive(),
  spanKindSchema,
]);

export const annotationRecordSchema = z
  .object({
    sentence_id: z.string().min(1),
    tokens: z.array(z.string().min(1)).min(1),
    spans: z.array(spanSchema),
  })
  .superRefine((rec, ctx) => {
    let prevEnd = 0;
    for (const [start, end, kind] of rec.spans) {
      if (end <= start) {
        ctx.addIssue({ code: "custom", message: `empty span [${start}, ${end}) ${kind}` });
      }
      if (start < prevEnd) {
        ctx.addIssue({ code: "custom", message: "spans must be sorted and non-overlapping" });
      }
      if (end > rec.tokens.length) {
        ctx.addIssue({ code: "custom", message: `span end ${end} exceeds ${rec.tokens.length} tokens` });
      }
      prevEnd = end;
    }
  });

export type AnnotationRecord = z.infer<typeof annotationRecordSchema>;

export const corpusRecordSchema = z.object({
  id: z.string().min(1),
  text: z.string(),
});

export type CorpusRecord = z.infer<typeof corpusRecordSchema>;
