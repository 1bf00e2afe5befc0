import type { MenuListing, NullKind, Selection } from './schema.js';

/**
 * Selection state for one attacked argument's menu.
 *
 * Mirrors the protocol's per-argument pick: either at least one listed
 * counterargument or exactly one null option, never both. Choosing a null
 * clears the counterargument ticks and vice versa, so an invalid payload
 * cannot be built from this state.
 */
export class MenuSelection {
  readonly listing: MenuListing;
  private counters = new Set<string>();
  private nullChoice: NullKind | null = null;

  constructor(listing: MenuListing) {
    this.listing = listing;
  }

  get chosenCounters(): string[] {
    return [...this.counters].sort();
  }

  get chosenNull(): NullKind | null {
    return this.nullChoice;
  }

  /** Counter checkboxes are disabled while a null option is selected. */
  get countersDisabled(): boolean {
    return this.nullChoice !== null;
  }

  toggleCounter(id: string): void {
    if (!this.listing.counterarguments.some((c) => c.id === id)) {
      throw new Error(`${id} is not on the menu for ${this.listing.argument}`);
    }
    if (this.counters.has(id)) {
      this.counters.delete(id);
    } else {
      this.counters.add(id);
      this.nullChoice = null;
    }
  }

  chooseNull(kind: NullKind): void {
    if (!this.listing.nulls.includes(kind)) {
      throw new Error(`no ${kind} option for ${this.listing.argument}`);
    }
    this.nullChoice = kind; // at most one null; re-choosing replaces it
    this.counters.clear();
  }

  clearNull(): void {
    this.nullChoice = null;
  }

  isComplete(): boolean {
    return this.nullChoice !== null || this.counters.size > 0;
  }

  toSelection(): Selection {
    if (!this.isComplete()) {
      throw new Error(`no choice made for ${this.listing.argument}`);
    }
    if (this.nullChoice !== null) {
      return { argument: this.listing.argument, null: this.nullChoice };
    }
    return { argument: this.listing.argument, counterarguments: this.chosenCounters };
  }
}

/** The whole pending menu: one MenuSelection per attacked argument. */
export class MenuFormState {
  readonly items: MenuSelection[];

  constructor(listings: MenuListing[]) {
    this.items = listings.map((listing) => new MenuSelection(listing));
  }

  item(argument: string): MenuSelection {
    const found = this.items.find((i) => i.listing.argument === argument);
    if (!found) {
      throw new Error(`no menu for ${argument}`);
    }
    return found;
  }

  /** Submit stays disabled until every attacked argument has a valid choice. */
  allComplete(): boolean {
    return this.items.every((item) => item.isComplete());
  }

  acceptAll(): void {
    for (const item of this.items) {
      item.chooseNull('acc');
    }
  }

  toSelections(): Selection[] {
    return this.items.map((item) => item.toSelection());
  }
}
