import { ApiClient, HttpTransport } from "./api.js";
import { App } from "./app.js";

const CONDITIONS = [
  ["no_feedback", "No feedback"],
  ["numeric", "Numeric feedback"],
  ["optional", "Optional feedback"],
  ["subgoal", "Sub-goal"],
  ["subgoal_numeric", "Sub-goal with numeric feedback"],
] as const;

function boot(): void {
  const root = document.getElementById("app");
  if (!root) return;
  const params = new URLSearchParams(window.location.search);
  const api = new ApiClient(new HttpTransport(params.get("server") ?? ""));
  const app = new App(root, api);

  const resumeId = params.get("session");
  if (resumeId) {
    void app.resume(resumeId);
    return;
  }

  const condition = params.get("condition");
  if (condition) {
    const seed = params.get("seed");
    void app.start(condition, seed === null ? undefined : Number(seed));
    return;
  }

  // landing screen: pick a condition
  const screen = document.createElement("div");
  screen.className = "screen landing";
  const title = document.createElement("h1");
  title.textContent = "Tower of Hanoi";
  screen.appendChild(title);
  const select = document.createElement("select");
  for (const [value, label] of CONDITIONS) {
    const option = document.createElement("option");
    option.value = value;
    option.textContent = label;
    select.appendChild(option);
  }
  screen.appendChild(select);
  const button = document.createElement("button");
  button.textContent = "Start";
  button.addEventListener("click", () => {
    screen.remove();
    void app.start(select.value);
  });
  screen.appendChild(button);
  root.appendChild(screen);
}

boot();
