import type {
  CreateSessionRequest,
  CreateSessionResponse,
  ErrorBody,
  GraphsResponse,
  MoveResponse,
  RecordBeliefRequest,
  Selection,
  SubmitMoveRequest,
  TranscriptResponse,
} from './schema.js';

export class ApiRequestError extends Error {
  readonly code: string;
  readonly condition?: number;
  readonly status: number;

  constructor(status: number, body: ErrorBody) {
    super(body.error.message);
    this.name = 'ApiRequestError';
    this.status = status;
    this.code = body.error.code;
    this.condition = body.error.condition;
  }
}

export class TransportError extends Error {
  constructor(message: string, readonly cause?: unknown) {
    super(message);
    this.name = 'TransportError';
  }
}

type FetchLike = typeof fetch;

/** Typed client for the session endpoints; the only way the UI talks to the engine. */
export class ApsClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, {
        method,
        headers: body === undefined ? undefined : { 'content-type': 'application/json' },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (cause) {
      throw new TransportError(`cannot reach ${this.baseUrl}`, cause);
    }
    const text = await response.text();
    const data = text ? JSON.parse(text) : {};
    if (!response.ok) {
      if (data && typeof data === 'object' && 'error' in data) {
        throw new ApiRequestError(response.status, data as ErrorBody);
      }
      throw new TransportError(`HTTP ${response.status} from ${path}`);
    }
    return data as T;
  }

  listGraphs(): Promise<GraphsResponse> {
    return this.request('GET', '/api/graphs');
  }

  createSession(body: Omit<CreateSessionRequest, 'v'>): Promise<CreateSessionResponse> {
    return this.request('POST', '/api/sessions', { v: 1, ...body });
  }

  submitMove(session: string, selections: Selection[]): Promise<MoveResponse> {
    const body: SubmitMoveRequest = { v: 1, selections };
    return this.request('POST', `/api/sessions/${session}/moves`, body);
  }

  recordBelief(session: string, phase: 'before' | 'after', value: number): Promise<unknown> {
    const body: RecordBeliefRequest = { v: 1, phase, value };
    return this.request('POST', `/api/sessions/${session}/belief`, body);
  }

  getTranscript(session: string): Promise<TranscriptResponse> {
    return this.request('GET', `/api/sessions/${session}/transcript`);
  }
}
