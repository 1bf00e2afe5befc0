import { ApsClient } from './client.js';
import { MenuFormState } from './menu.js';
import type { MenuListing, Selection, TraceEntry } from './schema.js';

export type Phase = 'stance' | 'dialogue' | 'after-belief' | 'done';

export interface ChatMessage {
  actor: 'system' | 'user';
  lines: string[];
}

export interface StartOptions {
  topic?: string;
  graph?: string;
  strategy?: 'advanced' | 'baseline';
  profile?: Record<string, number | string | boolean>;
  seed?: number;
  debug?: boolean;
}

export class StanceZeroError extends Error {
  constructor() {
    super('Please lean one way, however slightly; exactly zero is not permitted.');
    this.name = 'StanceZeroError';
  }
}

/**
 * Dialogue view state machine: stance -> dialogue -> after-belief -> done.
 *
 * Keeps the message log, the pending menu state, and the single-flight
 * guard; it owns everything the DOM handlers need, so headless tests drive
 * exactly the code path the page does.
 */
export class DialogueController {
  phase: Phase = 'stance';
  log: ChatMessage[] = [];
  menu: MenuFormState | null = null;
  session: string | null = null;
  graph: string | null = null;
  status = 'in_progress';
  lastTrace: TraceEntry[] | null = null;
  busy = false;

  private texts = new Map<string, string>();

  constructor(private readonly client: ApsClient) {}

  private remember(listings: MenuListing[]): void {
    for (const listing of listings) {
      this.texts.set(listing.argument, listing.text);
      for (const counter of listing.counterarguments) {
        this.texts.set(counter.id, counter.text);
      }
    }
  }

  private textOf(id: string): string {
    return this.texts.get(id) ?? id;
  }

  private async singleFlight<T>(action: () => Promise<T>): Promise<T> {
    if (this.busy) {
      throw new Error('a request is already in flight for this session');
    }
    this.busy = true;
    try {
      return await action();
    } finally {
      this.busy = false;
    }
  }

  async start(stance: number, options: StartOptions = {}): Promise<void> {
    if (this.phase !== 'stance') {
      throw new Error(`cannot start from phase ${this.phase}`);
    }
    if (stance === 0) {
      throw new StanceZeroError();
    }
    await this.singleFlight(async () => {
      const response = await this.client.createSession({
        stance,
        topic: options.topic,
        graph: options.graph,
        strategy: options.strategy ?? 'advanced',
        profile: options.profile,
        seed: options.seed,
        debug: options.debug,
      });
      this.session = response.session;
      this.graph = response.graph;
      this.texts.set(response.goal.id, response.goal.text);
      this.remember(response.listings);
      this.log.push({ actor: 'system', lines: [response.goal.text] });
      this.status = response.status;
      if (response.terminated) {
        this.menu = null;
        this.phase = 'after-belief';
      } else {
        this.menu = new MenuFormState(response.listings);
        this.phase = 'dialogue';
      }
    });
  }

  /** Submit the completed menu; appends both sides to the log. */
  async submit(): Promise<void> {
    if (this.phase !== 'dialogue' || !this.menu || !this.session) {
      throw new Error('no menu to submit');
    }
    if (!this.menu.allComplete()) {
      throw new Error('every statement needs a choice before sending');
    }
    const selections = this.menu.toSelections();
    await this.singleFlight(async () => {
      const response = await this.client.submitMove(this.session!, selections);
      this.log.push({ actor: 'user', lines: this.describeSelections(selections) });
      this.remember(response.listings);
      const systemLines = response.system_move.arguments.map((id) => this.textOf(id));
      this.log.push({
        actor: 'system',
        lines: systemLines.length ? systemLines : ['(the system rests its case)'],
      });
      this.lastTrace = response.trace ?? null;
      this.status = response.status;
      if (response.terminated) {
        this.menu = null;
        this.phase = 'after-belief';
      } else {
        this.menu = new MenuFormState(response.listings);
      }
    });
  }

  async acceptAll(): Promise<void> {
    if (!this.menu) {
      throw new Error('no menu to accept');
    }
    this.menu.acceptAll();
    await this.submit();
  }

  async recordAfterBelief(value: number): Promise<void> {
    if (this.phase !== 'after-belief' || !this.session) {
      throw new Error('the dialogue has not finished yet');
    }
    await this.singleFlight(async () => {
      await this.client.recordBelief(this.session!, 'after', value);
      this.phase = 'done';
    });
  }

  async canonicalTranscript(): Promise<string> {
    if (!this.session) {
      throw new Error('no session');
    }
    const response = await this.client.getTranscript(this.session);
    return response.canonical;
  }

  private describeSelections(selections: Selection[]): string[] {
    const lines: string[] = [];
    for (const selection of selections) {
      if ('null' in selection) {
        lines.push(
          selection.null === 'acc'
            ? `(agrees with: ${this.textOf(selection.argument)})`
            : `(disagrees, no listed reason: ${this.textOf(selection.argument)})`,
        );
      } else {
        for (const id of selection.counterarguments) {
          lines.push(this.textOf(id));
        }
      }
    }
    return lines;
  }
}
