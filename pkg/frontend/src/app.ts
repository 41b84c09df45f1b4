import { ApiClient, ApiError } from "./api.js";
import { renderBoard, renderGoalPanel } from "./board.js";
import type { MoveOutcome, SessionView, TrialRecordSummary } from "./types.js";

// The service adjudicates everything: legality, labels, scores, budgets.
// This controller only sequences screens and mirrors server numbers.

export class App {
  private view: SessionView | null = null;
  private selectedPeg: number | null = null;
  private inFlight = false;
  private banner: string | null = null;
  private lastRecord: TrialRecordSummary | null = null;
  private keyHandler: ((ev: KeyboardEvent) => void) | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  get session(): SessionView | null {
    return this.view;
  }

  async start(condition: string, seed?: number): Promise<void> {
    this.view = await this.api.createSession(condition, seed);
    this.installKeyboard();
    this.renderTrial();
  }

  async resume(sessionId: string): Promise<void> {
    this.view = await this.api.getSession(sessionId);
    this.installKeyboard();
    if (this.view.status === "finished") {
      this.renderSummary();
    } else if (this.view.status === "expired") {
      this.renderExpired();
    } else {
      this.renderTrial();
    }
  }

  private installKeyboard(): void {
    if (this.keyHandler) return;
    this.keyHandler = (ev: KeyboardEvent) => {
      if (ev.key === "Escape") {
        this.selectedPeg = null;
        this.renderTrial();
        return;
      }
      const peg = { "1": 0, "2": 1, "3": 2 }[ev.key];
      if (peg !== undefined) this.handlePeg(peg);
    };
    this.root.ownerDocument.addEventListener("keydown", this.keyHandler);
  }

  private el(tag: string, className?: string, text?: string): HTMLElement {
    const node = this.root.ownerDocument.createElement(tag);
    if (className) node.className = className;
    if (text !== undefined) node.textContent = text;
    return node;
  }

  // -- trial screen ---------------------------------------------------------

  renderTrial(): void {
    const view = this.view;
    if (!view) return;
    if (view.status === "expired") {
      this.renderExpired();
      return;
    }
    const trial = view.trial;
    if (!trial) {
      this.renderSummary();
      return;
    }
    this.root.textContent = "";
    const screen = this.el("div", "screen trial-screen");

    const header = this.el("div", "trial-header");
    header.appendChild(
      this.el("h2", "trial-title", `Trial ${trial.trial_index} of ${view.total_trials}`),
    );
    header.appendChild(this.el("span", "phase-tag", trial.phase));
    screen.appendChild(header);

    const counters = this.el("div", "counters");
    counters.appendChild(
      this.el("div", "counter moves", `Moves: ${trial.m_used} / ${trial.m_allowed}`),
    );
    counters.appendChild(this.el("div", "counter score", `Score: ${trial.running_score}`));
    counters.appendChild(
      this.el("div", "counter max-score", `Max possible: ${trial.max_score}`),
    );
    screen.appendChild(counters);

    const bannerEl = this.el("div", "feedback-banner");
    if (this.banner) {
      bannerEl.textContent = this.banner;
      bannerEl.classList.add(this.banner.startsWith("good") ? "good" : "bad");
    } else {
      bannerEl.classList.add("empty");
    }
    screen.appendChild(bannerEl);

    const boardEl = this.el("div", "board main-board");
    renderBoard(boardEl, trial.board, {
      interactive: !this.inFlight,
      selectedPeg: this.selectedPeg,
      onPegClick: (peg) => this.handlePeg(peg),
    });
    screen.appendChild(boardEl);

    const goals = this.el("div", "goals");
    const goalEl = this.el("div");
    renderGoalPanel(goalEl, "Goal", trial.target, "goal");
    goals.appendChild(goalEl);
    if (trial.subgoal) {
      const subEl = this.el("div");
      renderGoalPanel(subEl, "First try to reach", trial.subgoal, "subgoal");
      goals.appendChild(subEl);
    }
    screen.appendChild(goals);

    if (trial.feedback_on_request) {
      const button = this.el("button", "get-feedback", "Get Feedback") as HTMLButtonElement;
      button.addEventListener("click", () => this.requestFeedback());
      screen.appendChild(button);
    }

    screen.appendChild(
      this.el("p", "hint", "Click two pegs (or press 1/2/3) to move a disk."),
    );
    this.root.appendChild(screen);
  }

  private async handlePeg(peg: number): Promise<void> {
    if (this.inFlight || !this.view?.trial || this.view.status !== "active") return;
    if (this.selectedPeg === null) {
      this.selectedPeg = peg;
      this.renderTrial();
      return;
    }
    if (this.selectedPeg === peg) {
      this.selectedPeg = null;
      this.renderTrial();
      return;
    }
    const from = this.selectedPeg;
    this.selectedPeg = null;
    await this.submitMove(from, peg);
  }

  private async submitMove(from: number, to: number): Promise<void> {
    const view = this.view;
    if (!view?.trial) return;
    this.inFlight = true;
    let outcome: MoveOutcome;
    try {
      outcome = await this.api.submitMove(view.session_id, from, to);
    } catch (err) {
      this.inFlight = false;
      if (err instanceof ApiError && err.payload.error === "IllegalMove") {
        this.flashRejection();
      } else if (err instanceof ApiError && err.payload.error === "SessionExpired") {
        view.status = "expired";
        this.renderExpired();
      } else {
        this.renderConnectionError(err);
      }
      return;
    }
    this.inFlight = false;
    this.reconcile(outcome);
  }

  private reconcile(outcome: MoveOutcome): void {
    const view = this.view!;
    const trial = view.trial!;
    trial.board = outcome.state;
    trial.m_used = outcome.m_used;
    trial.running_score = outcome.running_score;
    this.banner = outcome.label;
    if (outcome.trial_complete) {
      this.banner = null;
      this.lastRecord = outcome.record ?? null;
      if (outcome.session_status) view.status = outcome.session_status as SessionView["status"];
      this.renderTrialComplete(outcome);
    } else {
      this.renderTrial();
    }
  }

  private flashRejection(): void {
    this.renderTrial();
    const board = this.root.querySelector(".main-board");
    board?.classList.add("rejected");
  }

  private async requestFeedback(): Promise<void> {
    const view = this.view;
    if (!view?.trial || this.inFlight) return;
    this.inFlight = true;
    try {
      const fb = await this.api.requestFeedback(view.session_id);
      this.inFlight = false;
      this.banner = fb.label;
      view.trial.running_score = fb.running_score;
      this.renderTrial();
    } catch (err) {
      this.inFlight = false;
      if (err instanceof ApiError) {
        this.banner = null;
        this.renderTrial();
      } else {
        this.renderConnectionError(err);
      }
    }
  }

  // -- completion / summary ---------------------------------------------------

  private renderTrialComplete(outcome: MoveOutcome): void {
    this.root.textContent = "";
    const screen = this.el("div", "screen complete-screen");
    screen.appendChild(
      this.el("h2", outcome.solved ? "result solved" : "result failed",
        outcome.solved ? "Solved!" : "Out of moves"),
    );
    const record = outcome.record;
    if (record) {
      const table = this.el("table", "score-breakdown");
      const rows: Array<[string, number]> = [
        ["Base", record.score.base],
        ["Feedback bonus", record.score.feedback_bonus],
        ["Feedback penalty", -record.score.optional_penalty],
        ["Sub-goal bonus", record.score.subgoal_bonus],
        ["Total", record.score.total],
      ];
      for (const [label, value] of rows) {
        const tr = this.el("tr");
        tr.appendChild(this.el("td", "label", label));
        tr.appendChild(this.el("td", "value", String(value)));
        table.appendChild(tr);
      }
      screen.appendChild(table);
      screen.appendChild(this.el("p", "pct", `Percentage score: ${record.pct.toFixed(2)}%`));
    }
    const button = this.el("button", "advance", "Continue") as HTMLButtonElement;
    button.addEventListener("click", () => this.advance());
    screen.appendChild(button);
    this.root.appendChild(screen);
  }

  private async advance(): Promise<void> {
    const view = this.view;
    if (!view) return;
    if (view.status === "finished") {
      this.view = await this.api.getSession(view.session_id);
      this.renderSummary();
      return;
    }
    try {
      this.view = await this.api.advance(view.session_id);
      this.banner = null;
      if (this.view.status === "finished" || !this.view.trial) {
        this.renderSummary();
      } else {
        this.renderTrial();
      }
    } catch (err) {
      if (err instanceof ApiError && err.payload.error === "SessionExpired") {
        view.status = "expired";
        this.renderExpired();
      } else {
        this.renderConnectionError(err);
      }
    }
  }

  renderSummary(): void {
    const view = this.view;
    if (!view) return;
    this.root.textContent = "";
    const screen = this.el("div", "screen summary-screen");
    screen.appendChild(this.el("h2", "summary-title", "Session complete"));
    const table = this.el("table", "summary-table");
    const head = this.el("tr");
    for (const column of ["Trial", "Phase", "Solved", "Score", "Percentage"]) {
      head.appendChild(this.el("th", undefined, column));
    }
    table.appendChild(head);
    for (const row of view.completed) {
      const tr = this.el("tr", `trial-row ${row.phase}`);
      tr.appendChild(this.el("td", "trial-index", String(row.trial_index)));
      tr.appendChild(this.el("td", "phase", row.phase));
      tr.appendChild(this.el("td", "solved", row.solved ? "yes" : "no"));
      tr.appendChild(this.el("td", "score", String(row.score)));
      tr.appendChild(this.el("td", "pct", row.pct.toFixed(2)));
      table.appendChild(tr);
    }
    screen.appendChild(table);
    this.root.appendChild(screen);
  }

  private renderExpired(): void {
    this.root.textContent = "";
    const screen = this.el("div", "screen expired-screen");
    screen.appendChild(this.el("h2", undefined, "Session expired"));
    screen.appendChild(
      this.el("p", undefined, "The 90-minute budget is spent; inputs are disabled."),
    );
    this.root.appendChild(screen);
  }

  private renderConnectionError(err: unknown): void {
    const bannerEl = this.el("div", "connection-error", "Connection lost. Retrying may help.");
    const retry = this.el("button", "retry", "Retry") as HTMLButtonElement;
    retry.addEventListener("click", () => this.resume(this.view!.session_id));
    bannerEl.appendChild(retry);
    this.root.prepend(bannerEl);
    void err;
  }
}
