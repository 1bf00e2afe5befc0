// End-to-end: a scripted dialogue through the live HTTP service must yield
// a transcript byte-identical to the engine-only trace of the same script.
//
// No browser runs in this environment, so the script drives the
// DialogueController directly; that is the same code path the DOM handlers
// call, with fetch doing real HTTP against a uvicorn child process.

import { execFile, spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, readFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join, resolve } from 'node:path';
import { fileURLToPath } from 'node:url';
import { promisify } from 'node:util';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApsClient } from '../src/client.js';
import { DialogueController } from '../src/controller.js';

const execFileAsync = promisify(execFile);

const REPO_ROOT = resolve(fileURLToPath(new URL('.', import.meta.url)), '..', '..');
const CONFIG = join(REPO_ROOT, 'demo', 'config.json');
const SCRIPT = join(REPO_ROOT, 'demo', 'script.json');
const PORT = 8655;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;

async function waitForServer(): Promise<void> {
  for (let attempt = 0; attempt < 120; attempt += 1) {
    try {
      const response = await fetch(`${BASE}/api/graphs`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolvePause) => setTimeout(resolvePause, 250));
  }
  throw new Error('service did not come up');
}

beforeAll(async () => {
  server = spawn(
    'python3',
    ['-m', 'aps.cli', 'serve', '--config', CONFIG, '--port', String(PORT)],
    { cwd: REPO_ROOT, stdio: 'ignore' },
  );
  await waitForServer();
}, 60_000);

afterAll(() => {
  server?.kill();
});

interface ScriptFile {
  stance: number;
  topic?: string;
  strategy: 'advanced' | 'baseline';
  seed: number;
  profile?: Record<string, number | string | boolean>;
  selections: (Array<Record<string, unknown>> | 'accept-all')[];
  belief_after?: number;
}

describe('scripted dialogue over HTTP vs engine-only trace', () => {
  it('produces a byte-identical transcript', async () => {
    const script: ScriptFile = JSON.parse(readFileSync(SCRIPT, 'utf-8'));

    // engine-only trace via the command line, same script and seed
    const traceDir = mkdtempSync(join(tmpdir(), 'aps-trace-'));
    const tracePath = join(traceDir, 'trace.json');
    await execFileAsync(
      'python3',
      ['-m', 'aps.cli', 'replay', '--config', CONFIG, '--script', SCRIPT, '--out', tracePath],
      { cwd: REPO_ROOT },
    );
    const engineTrace = readFileSync(tracePath, 'utf-8');

    // the same script through the client controller against live HTTP
    const controller = new DialogueController(new ApsClient(BASE));
    await controller.start(script.stance, {
      topic: script.topic,
      strategy: script.strategy,
      seed: script.seed,
      profile: script.profile,
    });
    for (const step of script.selections) {
      expect(controller.phase).toBe('dialogue');
      if (step === 'accept-all') {
        await controller.acceptAll();
        continue;
      }
      for (const selection of step) {
        const item = controller.menu!.item(String(selection.argument));
        if (typeof selection.null === 'string') {
          item.chooseNull(selection.null as 'acc' | 'rej');
        } else {
          for (const id of selection.counterarguments as string[]) {
            item.toggleCounter(id);
          }
        }
      }
      await controller.submit();
    }
    expect(controller.phase).toBe('after-belief');
    if (script.belief_after !== undefined) {
      await controller.recordAfterBelief(script.belief_after);
    }

    const wireTranscript = await controller.canonicalTranscript();
    expect(wireTranscript).toBe(engineTrace);
  }, 120_000);

  it('server rejects what the menu state cannot produce anyway', async () => {
    const client = new ApsClient(BASE);
    const created = await client.createSession({ stance: 1.0, strategy: 'baseline', seed: 5 });
    await expect(
      client.submitMove(created.session, [
        { argument: created.listings[0]!.argument, counterarguments: [], null: 'acc' } as never,
      ]),
    ).resolves.toBeTruthy();
    // a genuinely mixed selection is refused with the documented code
    const again = await client.createSession({ stance: 1.0, strategy: 'baseline', seed: 6 });
    const listing = again.listings[0]!;
    await expect(
      client.submitMove(again.session, [
        {
          argument: listing.argument,
          counterarguments: [listing.counterarguments[0]!.id],
          null: 'acc',
        } as never,
      ]),
    ).rejects.toMatchObject({ code: 'invalid_selection' });
  }, 30_000);
});
