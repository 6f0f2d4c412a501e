/** Client-side booking conflict preview.
 *
 * This mirrors the server's sweep-line check over half-open intervals so
 * the timeline can flag conflicts before submitting. It is a preview
 * only: the server re-validates every submission, and the e2e suite
 * asserts the two verdicts agree. */

import type { BookingDto, CalendarDto, ConflictDto } from "./types.js";

interface Interval {
  gpu_count: number;
  start: number;
  end: number;
}

export function maxOverlap(entries: readonly Interval[], start: number, end: number): number {
  if (start >= end) throw new Error("overlap query requires start < end");
  const events: Array<[number, number]> = [];
  for (const entry of entries) {
    if (entry.start < end && entry.end > start) {
      events.push([Math.max(entry.start, start), entry.gpu_count]);
      if (entry.end < end) events.push([entry.end, -entry.gpu_count]);
    }
  }
  // releases sort before acquisitions at the same instant: abutting
  // half-open intervals never stack
  events.sort((a, b) => a[0] - b[0] || a[1] - b[1]);
  let load = 0;
  let peak = 0;
  for (const [, delta] of events) {
    load += delta;
    if (load > peak) peak = load;
  }
  return peak;
}

/** Earliest maximal sub-interval of [start, end) where the proposed
 * reservation would exceed capacity, or null if it fits. */
export function conflictWindow(
  entries: readonly Interval[],
  capacity: number,
  gpuCount: number,
  start: number,
  end: number,
): { start: number; end: number } | null {
  const boundaries = new Set<number>([start, end]);
  for (const entry of entries) {
    if (entry.start < end && entry.end > start) {
      boundaries.add(Math.max(entry.start, start));
      if (entry.end < end) boundaries.add(entry.end);
    }
  }
  const points = [...boundaries].sort((a, b) => a - b);
  let conflictStart: number | null = null;
  let conflictEnd: number | null = null;
  for (let i = 0; i + 1 < points.length; i++) {
    const left = points[i];
    let load = 0;
    for (const entry of entries) {
      if (entry.start <= left && left < entry.end) load += entry.gpu_count;
    }
    if (load + gpuCount > capacity) {
      if (conflictStart === null) {
        conflictStart = left;
        conflictEnd = points[i + 1];
      } else if (conflictEnd === left) {
        conflictEnd = points[i + 1];
      } else {
        break; // earliest maximal run found
      }
    } else if (conflictStart !== null) {
      break;
    }
  }
  return conflictStart === null ? null : { start: conflictStart, end: conflictEnd! };
}

export type PreviewVerdict =
  | { ok: true }
  | { ok: false; conflict: { start: number; end: number } };

export function previewBooking(
  calendar: Pick<CalendarDto, "bookable_capacity" | "entries">,
  gpuCount: number,
  start: number,
  end: number,
): PreviewVerdict {
  const conflict = conflictWindow(
    calendar.entries,
    calendar.bookable_capacity,
    gpuCount,
    start,
    end,
  );
  return conflict === null ? { ok: true } : { ok: false, conflict };
}

/** True when the server's 409 names the same blockage the preview saw. */
export function conflictsAgree(
  preview: PreviewVerdict,
  serverConflict: ConflictDto | undefined,
): boolean {
  if (preview.ok) return serverConflict === undefined;
  if (serverConflict === undefined) return false;
  return (
    preview.conflict.start === serverConflict.start &&
    preview.conflict.end === serverConflict.end
  );
}

export function liveEntries(entries: readonly BookingDto[]): BookingDto[] {
  return entries.filter((b) => b.status === "Granted" || b.status === "Active");
}
