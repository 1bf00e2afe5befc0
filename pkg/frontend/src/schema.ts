// Wire types mirroring docs/protocol.md. Field names are byte-exact with
// the server's JSON; keep them snake_case.

export type NullKind = 'acc' | 'rej';

export interface ArgumentRef {
  id: string;
  text: string;
}

export interface MenuListing {
  argument: string;
  text: string;
  counterarguments: ArgumentRef[];
  nulls: NullKind[];
}

export interface SystemMove {
  step: number;
  arguments: string[];
}

export type Selection =
  | { argument: string; counterarguments: string[] }
  | { argument: string; null: NullKind };

export interface CreateSessionRequest {
  v: 1;
  stance: number;
  topic?: string;
  graph?: string;
  strategy: 'advanced' | 'baseline';
  profile?: Record<string, number | string | boolean>;
  seed?: number;
  debug?: boolean;
}

export interface CreateSessionResponse {
  v: 1;
  session: string;
  graph: string;
  goal: ArgumentRef;
  system_move: SystemMove;
  listings: MenuListing[];
  terminated: boolean;
  status: string;
}

export interface SubmitMoveRequest {
  v: 1;
  selections: Selection[];
}

export interface TraceEntry {
  arguments: string[];
  visits: number;
  mean_reward: number;
}

export interface MoveResponse {
  v: 1;
  system_move: SystemMove;
  listings: MenuListing[];
  terminated: boolean;
  status: string;
  trace?: TraceEntry[];
}

export interface RecordBeliefRequest {
  v: 1;
  phase: 'before' | 'after';
  value: number;
}

export interface TranscriptResponse {
  v: 1;
  session: string;
  transcript: unknown;
  canonical: string;
  belief_before: number | null;
  belief_after: number | null;
}

export interface GraphsResponse {
  v: 1;
  graphs: { id: string; goal: string; goal_text: string; nodes: number }[];
  topics: { id: string; when_positive: string; when_negative: string }[];
}

export interface ErrorBody {
  v: 1;
  error: { code: string; message: string; condition?: number };
}

export const NULL_LABELS: Record<NullKind, string> = {
  rej: 'None apply to me and I disagree with the statement.',
  acc: 'None apply to me and I agree with the statement.',
};
