import * as fs from "node:fs";

export interface JsonlLine {
  lineNo: number;
  record: unknown;
}

/** Parse a JSONL file; blank lines are skipped, bad JSON reports its line. */
export function readJsonl(path: string): JsonlLine[] {
  const out: JsonlLine[] = [];
  const lines = fs.readFileSync(path, "utf8").split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i];
    if (line === undefined || line.trim() === "") continue;
    try {
      out.push({ lineNo: i + 1, record: JSON.parse(line) });
    } catch (err) {
      throw new Error(`${path}:${i + 1}: ${(err as Error).message}`);
    }
  }
  return out;
}

export function writeJsonl(path: string, records: unknown[]): void {
  const body = records.map((r) => JSON.stringify(r)).join("\n");
  fs.writeFileSync(path, records.length > 0 ? body + "\n" : "");
}
