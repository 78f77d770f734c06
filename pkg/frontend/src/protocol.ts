// Wire protocol: newline-delimited JSON pushed by the session server.
// The server is the single source of truth; everything here is read-side
// validation so a garbled frame can never paint garbage on screen.

export type Condition = "hr_all" | "hr_others" | "hr_none";

export const CONDITIONS: Condition[] = ["hr_all", "hr_others", "hr_none"];

export interface SeatEntry {
  seat: number;
  label: string;
  idle: boolean;
  // present together only when this viewer may see the seat's vitals
  bpm?: number;
  confidence?: number;
  phase?: number;
  hist?: (number | null)[];
}

export interface StateMessage {
  type: "state";
  viewer: number | "operator";
  t_ms: number;
  condition: Condition;
  seats: SeatEntry[];
  // operator frames only
  game_running?: boolean;
  schedule?: Condition[];
  schedule_position?: number;
}

export interface AckMessage {
  type: "ack";
  cmd: string;
}

export interface ErrorMessage {
  type: "error";
  error: string;
}

export interface NoticeMessage {
  type: "notice";
  notice: string;
}

export type ServerMessage = StateMessage | AckMessage | ErrorMessage | NoticeMessage;

export const HIST_BUCKETS = 20;

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isCondition(v: unknown): v is Condition {
  return typeof v === "string" && (CONDITIONS as string[]).includes(v);
}

function checkSeatEntry(raw: any): SeatEntry {
  if (typeof raw !== "object" || raw === null) throw new Error("seat entry not an object");
  if (!isFiniteNumber(raw.seat)) throw new Error("seat entry missing seat index");
  if (typeof raw.label !== "string") throw new Error("seat entry missing label");
  if (typeof raw.idle !== "boolean") throw new Error("seat entry missing idle flag");
  const entry: SeatEntry = { seat: raw.seat, label: raw.label, idle: raw.idle };
  const vitals = ["bpm", "confidence", "phase", "hist"].filter((k) => k in raw);
  if (vitals.length === 0) return entry;
  // vitals arrive as a complete set or not at all; a partial set means the
  // frame is corrupt and must not be trusted
  if (vitals.length !== 4) throw new Error(`partial vitals (${vitals.join(",")})`);
  if (!isFiniteNumber(raw.bpm)) throw new Error("bad bpm");
  if (!isFiniteNumber(raw.confidence) || raw.confidence < 0 || raw.confidence > 1)
    throw new Error("bad confidence");
  if (!isFiniteNumber(raw.phase) || raw.phase < 0 || raw.phase > 1)
    throw new Error("bad phase");
  if (!Array.isArray(raw.hist) || raw.hist.length !== HIST_BUCKETS)
    throw new Error("bad hist");
  for (const v of raw.hist) {
    if (v !== null && !isFiniteNumber(v)) throw new Error("bad hist bucket");
  }
  entry.bpm = raw.bpm;
  entry.confidence = raw.confidence;
  entry.phase = raw.phase;
  entry.hist = raw.hist;
  return entry;
}

export function parseMessage(line: string): ServerMessage {
  let raw: any;
  try {
    raw = JSON.parse(line);
  } catch {
    throw new Error("not JSON");
  }
  if (typeof raw !== "object" || raw === null) throw new Error("not an object");
  switch (raw.type) {
    case "ack":
      if (typeof raw.cmd !== "string") throw new Error("ack without cmd");
      return { type: "ack", cmd: raw.cmd };
    case "error":
      if (typeof raw.error !== "string") throw new Error("error without text");
      return { type: "error", error: raw.error };
    case "notice":
      if (typeof raw.notice !== "string") throw new Error("notice without text");
      return { type: "notice", notice: raw.notice };
    case "state": {
      if (!isFiniteNumber(raw.t_ms)) throw new Error("state without t_ms");
      if (!isCondition(raw.condition)) throw new Error("unknown condition");
      if (raw.viewer !== "operator" && !isFiniteNumber(raw.viewer))
        throw new Error("bad viewer");
      if (!Array.isArray(raw.seats)) throw new Error("state without seats");
      const msg: StateMessage = {
        type: "state",
        viewer: raw.viewer,
        t_ms: raw.t_ms,
        condition: raw.condition,
        seats: raw.seats.map(checkSeatEntry),
      };
      if (raw.viewer === "operator") {
        if (typeof raw.game_running !== "boolean")
          throw new Error("operator frame without game_running");
        if (!Array.isArray(raw.schedule) || !raw.schedule.every(isCondition))
          throw new Error("operator frame without schedule");
        if (!isFiniteNumber(raw.schedule_position))
          throw new Error("operator frame without schedule_position");
        msg.game_running = raw.game_running;
        msg.schedule = raw.schedule;
        msg.schedule_position = raw.schedule_position;
      }
      return msg;
    }
    default:
      throw new Error(`unknown message type ${JSON.stringify(raw.type)}`);
  }
}

export type Command =
  | { type: "cmd"; cmd: "set_condition"; condition: Condition }
  | { type: "cmd"; cmd: "advance_schedule" }
  | { type: "cmd"; cmd: "start_game" }
  | { type: "cmd"; cmd: "end_game" };
