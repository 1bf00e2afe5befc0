import { DialogueController, StanceZeroError } from './controller.js';
import { NULL_LABELS } from './schema.js';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class ChatView {
  private messages: HTMLElement;
  private menuHost: HTMLElement;
  private stancePanel: HTMLElement;
  private beliefPanel: HTMLElement;
  private debugPanel: HTMLElement;
  private sendButton!: HTMLButtonElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly controller: DialogueController,
    private readonly debugEnabled: boolean,
  ) {
    this.messages = el('div', 'messages');
    this.menuHost = el('div', 'menu-host');
    this.stancePanel = el('div', 'panel stance-panel');
    this.beliefPanel = el('div', 'panel belief-panel');
    this.debugPanel = el('aside', 'debug-panel');
    root.append(this.stancePanel, this.messages, this.menuHost, this.beliefPanel);
    if (debugEnabled) root.append(this.debugPanel);
    this.renderStancePanel();
  }

  private slider(min: number, max: number): HTMLInputElement {
    const input = el('input');
    input.type = 'range';
    input.min = String(min);
    input.max = String(max);
    input.step = '0.01'; // transmitted as the decimal shown, never re-rounded
    input.value = '0';
    return input;
  }

  private renderStancePanel(): void {
    const prompt = el(
      'p',
      'prompt',
      'Are you against (left) or for (right) the statement under discussion, and to what degree?',
    );
    const slider = this.slider(-3, 3);
    const value = el('span', 'slider-value', '0.00');
    const warning = el('p', 'warning', 'Exactly zero is not permitted; please lean one way.');
    const begin = el('button', 'begin', 'Begin') as HTMLButtonElement;
    begin.disabled = true;
    slider.addEventListener('input', () => {
      value.textContent = Number(slider.value).toFixed(2);
      const zero = Number(slider.value) === 0;
      begin.disabled = zero;
      warning.style.display = zero ? 'block' : 'none';
    });
    begin.addEventListener('click', async () => {
      begin.disabled = true;
      try {
        await this.controller.start(Number(slider.value), {
          debug: this.debugEnabled,
          seed: Date.now() % 1_000_000,
        });
        this.stancePanel.style.display = 'none';
        this.renderConversation();
      } catch (error) {
        begin.disabled = false;
        this.showError(error);
      }
    });
    this.stancePanel.append(prompt, slider, value, warning, begin);
  }

  private renderConversation(): void {
    this.messages.replaceChildren();
    for (const message of this.controller.log) {
      const bubble = el('div', `bubble ${message.actor}`);
      for (const line of message.lines) {
        bubble.append(el('p', undefined, line));
      }
      this.messages.append(bubble);
    }
    this.renderMenu();
    this.renderDebug();
    if (this.controller.phase === 'after-belief') {
      this.renderBeliefPanel();
    }
  }

  private renderMenu(): void {
    this.menuHost.replaceChildren();
    const menu = this.controller.menu;
    if (!menu) return;
    const form = el('form', 'menu');
    form.append(el('p', 'prompt', 'Select your reason(s) against each statement presented below.'));
    for (const item of menu.items) {
      const block = el('fieldset', 'menu-item');
      block.append(el('legend', undefined, item.listing.text));
      for (const counter of item.listing.counterarguments) {
        const label = el('label', 'option');
        const box = el('input') as HTMLInputElement;
        box.type = 'checkbox';
        box.dataset.counter = counter.id;
        box.addEventListener('change', () => {
          item.toggleCounter(counter.id);
          this.refreshMenuControls();
        });
        label.append(box, el('span', undefined, counter.text));
        block.append(label);
      }
      for (const kind of item.listing.nulls) {
        const label = el('label', 'option null-option');
        const radio = el('input') as HTMLInputElement;
        radio.type = 'checkbox';
        radio.dataset.null = kind;
        radio.addEventListener('change', () => {
          if (radio.checked) {
            item.chooseNull(kind);
          } else {
            item.clearNull();
          }
          this.refreshMenuControls();
        });
        label.append(radio, el('span', undefined, NULL_LABELS[kind]));
        block.append(label);
      }
      block.dataset.argument = item.listing.argument;
      form.append(block);
    }
    this.sendButton = el('button', 'send', 'SEND') as HTMLButtonElement;
    this.sendButton.type = 'button';
    this.sendButton.addEventListener('click', async () => {
      this.sendButton.disabled = true; // one in-flight request per session
      try {
        await this.controller.submit();
        this.renderConversation();
      } catch (error) {
        this.sendButton.disabled = false;
        this.showError(error);
      }
    });
    form.append(this.sendButton);
    this.menuHost.append(form);
    this.refreshMenuControls();
  }

  /** Re-sync checkbox states with the exclusivity rules after any change. */
  private refreshMenuControls(): void {
    const menu = this.controller.menu;
    if (!menu) return;
    for (const block of this.menuHost.querySelectorAll<HTMLElement>('.menu-item')) {
      const item = menu.item(block.dataset.argument!);
      for (const input of block.querySelectorAll<HTMLInputElement>('input')) {
        if (input.dataset.null) {
          input.checked = item.chosenNull === input.dataset.null;
        } else if (input.dataset.counter) {
          input.checked = item.chosenCounters.includes(input.dataset.counter);
          input.disabled = item.countersDisabled;
        }
      }
    }
    if (this.sendButton) {
      this.sendButton.disabled = !menu.allComplete();
    }
  }

  private renderBeliefPanel(): void {
    this.beliefPanel.replaceChildren();
    this.beliefPanel.append(
      el('p', 'prompt', 'The discussion has ended. What is your belief in the opening statement now?'),
    );
    const slider = this.slider(-3, 3);
    const value = el('span', 'slider-value', '0.00');
    slider.addEventListener('input', () => {
      value.textContent = Number(slider.value).toFixed(2);
    });
    const done = el('button', 'finish', 'Record belief') as HTMLButtonElement;
    done.addEventListener('click', async () => {
      done.disabled = true;
      try {
        await this.controller.recordAfterBelief(Number(slider.value));
        this.beliefPanel.replaceChildren(el('p', 'thanks', 'Thank you for the conversation.'));
      } catch (error) {
        done.disabled = false;
        this.showError(error);
      }
    });
    this.beliefPanel.append(slider, value, done);
  }

  private renderDebug(): void {
    if (!this.debugEnabled) return;
    this.debugPanel.replaceChildren(el('h3', undefined, 'search statistics'));
    const trace = this.controller.lastTrace ?? [];
    for (const entry of trace) {
      this.debugPanel.append(
        el(
          'p',
          'trace-entry',
          `{${entry.arguments.join(', ')}}  visits=${entry.visits}  mean=${entry.mean_reward.toFixed(4)}`,
        ),
      );
    }
  }

  private showError(error: unknown): void {
    const text =
      error instanceof StanceZeroError
        ? error.message
        : error instanceof Error
          ? `Something went wrong: ${error.message}. You can retry.`
          : 'Something went wrong. You can retry.';
    const note = el('p', 'error', text);
    this.root.append(note);
    setTimeout(() => note.remove(), 6000);
  }
}
