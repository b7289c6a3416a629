/** DOM layer: renders the stepper, review pane, and results view from a
 * UiState and wires user actions back to the service API. */

import { ApiClient, ApiError } from "./api.js";
import {
  Action,
  UiState,
  buildView,
  controlsEnabled,
  displayIteration,
  initialState,
  iterationsForStep,
  reduce,
} from "./state.js";
import { OUTPUT_NAMES } from "./types.js";

export class App {
  private api: ApiClient;
  private root: HTMLElement;
  private state: UiState = initialState;
  private sessionId: string | null = null;

  constructor(api: ApiClient, root: HTMLElement) {
    this.api = api;
    this.root = root;
  }

  private dispatch(action: Action): void {
    this.state = reduce(this.state, action);
    this.render();
  }

  /** Fetch summary + history and replace the whole view (polling model:
   * the server is the single source of truth). */
  async refresh(): Promise<void> {
    if (!this.sessionId) return;
    try {
      const summary = await this.api.getSession(this.sessionId);
      const history = await this.api.history(this.sessionId);
      this.dispatch({
        type: "session-loaded",
        summary,
        records: history.records,
      });
    } catch (err) {
      this.dispatch({ type: "request-failed", message: describe(err) });
    }
  }

  private async mutate(fn: () => Promise<unknown>): Promise<void> {
    this.dispatch({ type: "request-started" });
    try {
      await fn();
      this.dispatch({ type: "request-finished" });
    } catch (err) {
      this.dispatch({ type: "request-failed", message: describe(err) });
    }
    await this.refresh();
  }

  async upload(file: File): Promise<void> {
    this.dispatch({ type: "request-started" });
    try {
      const summary = await this.api.createSession(file);
      this.sessionId = summary.id;
      this.dispatch({ type: "request-finished" });
    } catch (err) {
      this.dispatch({ type: "request-failed", message: describe(err) });
    }
    await this.refresh();
  }

  render(): void {
    const { view } = this.state;
    this.root.replaceChildren();
    if (this.state.banner) {
      const banner = el("div", `banner banner-${this.state.banner.kind}`);
      banner.textContent = this.state.banner.text;
      const close = el("button", "banner-close");
      close.textContent = "x";
      close.onclick = () => this.dispatch({ type: "dismiss-banner" });
      banner.appendChild(close);
      this.root.appendChild(banner);
    }
    if (!view) {
      this.root.appendChild(this.renderUpload());
      return;
    }
    this.root.appendChild(this.renderStepper());
    if (this.state.selectedStep !== null) {
      this.root.appendChild(this.renderReviewPane(this.state.selectedStep));
    }
    if (view.complete) {
      this.root.appendChild(this.renderResults());
    }
  }

  private renderUpload(): HTMLElement {
    const pane = el("div", "upload-pane");
    const label = el("p");
    label.textContent = "Upload a frontal angiogram (PNG) to begin.";
    const input = el("input") as HTMLInputElement;
    input.type = "file";
    input.accept = "image/png";
    input.onchange = () => {
      const file = input.files?.[0];
      if (file) void this.upload(file);
    };
    pane.append(label, input);
    return pane;
  }

  private renderStepper(): HTMLElement {
    const view = this.state.view!;
    const nav = el("nav", "stepper");
    const progress = el("div", "progress");
    progress.textContent = `Progress: ${view.progressLabel} accepted`;
    nav.appendChild(progress);
    const list = el("ol", "step-list");
    for (const slot of view.slots) {
      const item = el("li", `step badge-${slot.badge}`);
      if (slot.isCursor) item.classList.add("cursor");
      if (slot.index === this.state.selectedStep) item.classList.add("selected");
      item.textContent = `${slot.index}. ${slot.name}`;
      if (slot.viewable) {
        item.classList.add("viewable");
        item.onclick = () =>
          this.dispatch({ type: "select-step", step: slot.index });
      }
      list.appendChild(item);
    }
    nav.appendChild(list);
    return nav;
  }

  private renderReviewPane(step: number): HTMLElement {
    const view = this.state.view!;
    const pane = el("section", "review-pane");
    const slot = view.slots[step - 1];
    const title = el("h2");
    title.textContent = `Step ${step}: ${slot.name} (${slot.stage})`;
    pane.appendChild(title);

    const record = displayIteration(this.state.records, step);
    if (record && this.sessionId) {
      const compare = el("div", "compare");
      compare.append(
        this.imageCard("before", record.input_hash),
        this.imageCard("after", record.output_hash),
      );
      pane.appendChild(compare);
      pane.appendChild(this.renderTimeline(step));
    } else {
      const hint = el("p", "hint");
      hint.textContent = "No attempt yet. Advance to run this step.";
      pane.appendChild(hint);
    }

    if (slot.actionable) {
      pane.appendChild(this.renderControls(step, record?.iteration ?? null));
    }
    return pane;
  }

  private imageCard(caption: string, hash: string): HTMLElement {
    const card = el("figure", "image-card");
    const img = el("img") as HTMLImageElement;
    img.src = this.api.artifactUrl(this.sessionId!, hash);
    img.alt = caption;
    const cap = el("figcaption");
    cap.textContent = caption;
    card.append(img, cap);
    return card;
  }

  private renderTimeline(step: number): HTMLElement {
    const timeline = el("ul", "timeline");
    for (const rec of iterationsForStep(this.state.records, step)) {
      const item = el("li", `iteration state-${rec.state.toLowerCase()}`);
      item.textContent =
        `#${rec.iteration} ${rec.state} — "${rec.prompt_used}"`;
      timeline.appendChild(item);
    }
    return timeline;
  }

  private renderControls(
    step: number,
    iteration: number | null,
  ): HTMLElement {
    const enabled = controlsEnabled(this.state);
    const bar = el("div", "controls");
    const id = this.sessionId!;

    const advance = button("Advance", enabled && iteration === null, () =>
      this.mutate(() => this.api.advance(id)),
    );
    const accept = button("Accept", enabled && iteration !== null, () =>
      this.mutate(() => this.api.accept(id, step, iteration!)),
    );
    const reject = button("Reject", enabled && iteration !== null, () =>
      this.mutate(() => this.api.reject(id, step, iteration!)),
    );

    const prompt = el("input", "prompt-box") as HTMLInputElement;
    prompt.type = "text";
    prompt.placeholder = "Custom prompt for regeneration";
    const regenerate = button(
      "Regenerate",
      enabled && iteration !== null,
      () => {
        if (prompt.value.trim()) {
          void this.mutate(() => this.api.regenerate(id, step, prompt.value));
        }
      },
    );

    bar.append(advance, accept, reject, prompt, regenerate);
    return bar;
  }

  private renderResults(): HTMLElement {
    const pane = el("section", "results");
    const title = el("h2");
    title.textContent = "Final artifacts";
    pane.appendChild(title);
    const flow = el("img", "flow-overlay") as HTMLImageElement;
    flow.src = this.api.outputUrl(this.sessionId!, "flow.png");
    flow.alt = "flow overlay with stagnation zones";
    pane.appendChild(flow);
    const links = el("ul", "downloads");
    for (const name of OUTPUT_NAMES) {
      const item = el("li");
      const a = el("a") as HTMLAnchorElement;
      a.href = this.api.outputUrl(this.sessionId!, name);
      a.download = name;
      a.textContent = name;
      item.appendChild(a);
      links.appendChild(item);
    }
    pane.appendChild(links);
    return pane;
  }
}

function el(tag: string, className?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  return node;
}

function button(
  label: string,
  enabled: boolean,
  onClick: () => void,
): HTMLButtonElement {
  const b = document.createElement("button");
  b.textContent = label;
  b.disabled = !enabled;
  b.onclick = onClick;
  return b;
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `HTTP ${err.status}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}

export { buildView };
