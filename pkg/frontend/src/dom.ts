/**
 * Thin browser binding. All behavior lives in the DOM-free controllers;
 * this layer renders state and forwards events.
 */

import { INSTRUCTION_WORDING, type RunnerConfig } from "./config.js";
import type { SessionController } from "./session.js";

function el(tag: string, attrs: Record<string, string>, text?: string): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

export class DomRunner {
  constructor(
    private readonly session: SessionController,
    private readonly config: RunnerConfig,
    private readonly root: HTMLElement,
  ) {}

  start(): void {
    this.renderPretask();
  }

  private clear(): void {
    this.root.textContent = "";
  }

  private renderPretask(): void {
    this.clear();
    const pretask = this.session.pretask;
    const initial = pretask.startRound();
    const card = el("div", {
      id: "card",
      style: `width:${initial}px;aspect-ratio:1.586;background:#2b6;`,
    });
    const slider = el("input", {
      type: "range",
      min: "10",
      max: "1000",
      value: String(initial),
    }) as HTMLInputElement;
    slider.addEventListener("input", () => {
      pretask.setSize(Number(slider.value));
      card.style.width = `${slider.value}px`;
    });
    const submit = el("button", { id: "submit" }, "Submit");
    submit.addEventListener("click", () => {
      pretask.submitRound();
      if (pretask.complete) {
        void this.submitGate();
      } else {
        this.renderPretask();
      }
    });
    this.root.append(
      el(
        "p",
        {},
        "Place your physical card on the screen and resize the image to match it.",
      ),
      card,
      slider,
      submit,
    );
  }

  private async submitGate(): Promise<void> {
    this.clear();
    this.root.append(el("p", {}, "Checking your result..."));
    try {
      const response = await this.session.submitPretask();
      if (response.decision === "admit") {
        this.renderBlockIntro();
      } else {
        this.renderThanks("Thank you! The session ends here.");
      }
    } catch {
      this.clear();
      const retry = el("button", {}, "Connection failed. Retry");
      retry.addEventListener("click", () => void this.submitGate());
      this.root.append(el("p", {}, "We could not reach the server."), retry);
    }
  }

  private renderBlockIntro(): void {
    this.clear();
    const block = this.session.currentBlock();
    const spec = this.session.currentBlockSpec();
    const heading = spec.is_practice
      ? "Practice"
      : `Main block (${spec.instruction.toLowerCase()})`;
    const wording = INSTRUCTION_WORDING[spec.instruction];
    const start = el("button", { id: "start" }, "Start");
    start.addEventListener("click", () => {
      block.tapStart();
      this.renderTarget();
    });
    this.root.append(el("h2", {}, heading), el("p", {}, wording), start);
  }

  private renderTarget(): void {
    this.clear();
    const arena = el("div", {
      id: "arena",
      style:
        "position:relative;" +
        `width:${this.config.pc_area[0]}px;height:${this.config.pc_area[1]}px;`,
    });
    arena.addEventListener("pointerdown", (event) => {
      const bounds = arena.getBoundingClientRect();
      const beforeSpec = this.session.currentBlockSpec();
      this.session.tapPx({
        x: event.clientX - bounds.left,
        y: event.clientY - bounds.top,
      });
      if (this.session.phase === "uploading") {
        void this.finish();
      } else if (this.session.currentBlockSpec() !== beforeSpec) {
        this.renderBlockIntro(); // block finished, next one needs Start
      } else {
        this.renderTarget();
      }
    });
    const block = this.session.currentBlock();
    if (!block.done) {
      const target = block.currentTarget();
      const style =
        target.shape === "circle"
          ? "position:absolute;border-radius:50%;background:#d33;" +
            `width:${target.width}px;height:${target.width}px;` +
            `left:${target.center.x - target.width / 2}px;` +
            `top:${target.center.y - target.width / 2}px;`
          : "position:absolute;background:#d33;left:0;right:0;" +
            `height:${target.width}px;top:${target.center.y - target.width / 2}px;`;
      arena.append(el("div", { class: "target", style }));
    }
    this.root.append(arena);
  }

  private async finish(): Promise<void> {
    this.clear();
    this.root.append(el("p", {}, "Uploading your session..."));
    const result = await this.session.uploadSession();
    if (result.ok) {
      this.renderThanks("All done, thank you!");
      return;
    }
    this.renderThanks(
      "Upload failed; please copy your session data below and send it to the experimenters.",
    );
    const pending = el("textarea", { rows: "6", cols: "60" }) as HTMLTextAreaElement;
    pending.value = this.session.exportPending() ?? "";
    this.root.append(pending);
  }

  private renderThanks(message: string): void {
    this.clear();
    this.root.append(el("p", { id: "thanks" }, message));
  }
}
