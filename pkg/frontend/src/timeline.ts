/** Booking timeline view model: existing reservations laid out in
 * non-overlapping lanes, plus the user's in-progress selection with a
 * live conflict verdict from the same preview the server enforces. */

import { previewBooking, type PreviewVerdict } from "./overlap.js";
import type { BookingDto, CalendarDto } from "./types.js";

/** Interval selection snaps to a coarse grid to avoid accidental
 * micro-bookings. */
export const SNAP_SECONDS = 15 * 60;

export function snapToGrid(t: number, grid: number = SNAP_SECONDS): number {
  return Math.round(t / grid) * grid;
}

export interface TimelineLane {
  bookings: BookingDto[];
}

export interface ProposedSelection {
  start: number;
  end: number;
  gpus: number;
  verdict: PreviewVerdict;
}

export interface TimelineView {
  cluster: string;
  capacity: number;
  lanes: TimelineLane[];
  proposed: ProposedSelection | null;
}

/** Greedy first-fit lane assignment over bookings sorted by start; two
 * bookings share a lane only if their half-open intervals are disjoint. */
export function assignLanes(entries: readonly BookingDto[]): TimelineLane[] {
  const sorted = [...entries].sort((a, b) => a.start - b.start || a.end - b.end);
  const lanes: TimelineLane[] = [];
  for (const booking of sorted) {
    let placed = false;
    for (const lane of lanes) {
      const last = lane.bookings[lane.bookings.length - 1];
      if (last.end <= booking.start) {
        lane.bookings.push(booking);
        placed = true;
        break;
      }
    }
    if (!placed) lanes.push({ bookings: [booking] });
  }
  return lanes;
}

export function buildTimeline(
  calendar: CalendarDto,
  proposal?: { start: number; end: number; gpus: number; snap?: boolean },
): TimelineView {
  let proposed: ProposedSelection | null = null;
  if (proposal) {
    const snap = proposal.snap ?? true;
    let start = snap ? snapToGrid(proposal.start) : proposal.start;
    let end = snap ? snapToGrid(proposal.end) : proposal.end;
    if (end <= start) end = start + (snap ? SNAP_SECONDS : 1);
    proposed = {
      start,
      end,
      gpus: proposal.gpus,
      verdict: previewBooking(calendar, proposal.gpus, start, end),
    };
  }
  return {
    cluster: calendar.cluster,
    capacity: calendar.bookable_capacity,
    lanes: assignLanes(calendar.entries),
    proposed,
  };
}
