/** Shared widget shell: a DOM container plus the refresh bookkeeping the
 *  session store relies on. Widgets fetch their payload, stamp the
 *  revision it carries, and render — nothing else touches the network. */

import type { ApiClient } from "../api.js";
import type { SessionStore } from "../session.js";

export abstract class Widget<P extends { revision: number }> {
  readonly element: HTMLElement;
  lastRevision = -1;
  /** Number of completed renders; tests assert one per gesture. */
  renderCount = 0;
  lastError: string | null = null;

  constructor(
    readonly id: string,
    protected readonly store: SessionStore,
    protected readonly api: ApiClient,
  ) {
    this.element = document.createElement("section");
    this.element.className = `widget widget-${id}`;
    this.element.dataset.widget = id;
  }

  async refresh(revision: number): Promise<void> {
    let payload: P;
    try {
      payload = await this.fetchPayload(revision);
    } catch (error) {
      this.lastError = error instanceof Error ? error.message : String(error);
      this.lastRevision = revision;
      this.renderCount += 1;
      this.renderError(this.lastError);
      return;
    }
    this.lastError = null;
    this.lastRevision = payload.revision;
    this.renderCount += 1;
    this.render(payload);
  }

  /** Re-render with current local parameters (e.g. a drop-down change
   *  that needs no server mutation). */
  protected refreshSelf(): Promise<void> {
    return this.refresh(this.store.revision);
  }

  protected abstract fetchPayload(revision: number): Promise<P>;
  protected abstract render(payload: P): void;

  protected renderError(message: string): void {
    this.element.replaceChildren(el("div", "widget-error", message));
  }
}

/** Tiny element helper. */
export function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function option(value: string, label?: string): HTMLOptionElement {
  const node = document.createElement("option");
  node.value = value;
  node.textContent = label ?? value;
  return node;
}
