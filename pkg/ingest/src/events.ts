// BIDS-style events.tsv parsing for the cue-driven sessions: one row per
// trial with onset/duration in seconds, the experimental condition and the
// cued word.

export interface TrialEvent {
  onsetS: number;
  durationS: number;
  condition: string;
  trialType: string;
}

export class UnknownLabel extends Error {}

const REQUIRED = ["onset", "duration", "condition", "trial_type"];

export function parseEventsTsv(text: string): TrialEvent[] {
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length === 0) {
    throw new Error("empty events file");
  }
  const header = lines[0].split("\t").map((h) => h.trim());
  const column: Record<string, number> = {};
  header.forEach((name, i) => {
    column[name] = i;
  });
  for (const name of REQUIRED) {
    if (!(name in column)) {
      throw new Error(`events file missing column '${name}'`);
    }
  }

  const events: TrialEvent[] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split("\t");
    const onsetS = Number(cells[column.onset]);
    const durationS = Number(cells[column.duration]);
    if (!Number.isFinite(onsetS) || !Number.isFinite(durationS)) {
      throw new Error(`bad onset/duration in row: ${line}`);
    }
    events.push({
      onsetS,
      durationS,
      condition: cells[column.condition].trim(),
      trialType: cells[column.trial_type].trim(),
    });
  }
  return events;
}
