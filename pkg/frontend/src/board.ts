// Board rendering: a state is a digit string where digit i is the peg of
// disk i, disks numbered smallest to largest.

export interface BoardOptions {
  interactive?: boolean;
  selectedPeg?: number | null;
  onPegClick?: (peg: number) => void;
}

function pegStacks(state: string): number[][] {
  // bottom-to-top disk lists per peg (largest at the bottom)
  const stacks: number[][] = [[], [], []];
  for (let disk = state.length - 1; disk >= 0; disk--) {
    stacks[Number(state[disk])].push(disk);
  }
  return stacks;
}

export function renderBoard(
  container: HTMLElement,
  state: string,
  options: BoardOptions = {},
): void {
  const n = state.length;
  container.textContent = "";
  container.classList.add("board");
  const stacks = pegStacks(state);
  for (let peg = 0; peg < 3; peg++) {
    const pegEl = container.ownerDocument.createElement("div");
    pegEl.className = "peg";
    pegEl.dataset.peg = String(peg);
    if (options.selectedPeg === peg) pegEl.classList.add("selected");
    const rod = container.ownerDocument.createElement("div");
    rod.className = "rod";
    pegEl.appendChild(rod);
    for (const disk of stacks[peg]) {
      const diskEl = container.ownerDocument.createElement("div");
      diskEl.className = "disk";
      diskEl.dataset.disk = String(disk);
      const width = 28 + (64 * (disk + 1)) / n;
      diskEl.style.width = `${width}%`;
      diskEl.textContent = String(disk);
      pegEl.appendChild(diskEl);
    }
    if (options.interactive && options.onPegClick) {
      pegEl.addEventListener("click", () => options.onPegClick!(peg));
    }
    container.appendChild(pegEl);
  }
}

export function renderGoalPanel(
  container: HTMLElement,
  title: string,
  state: string,
  cssClass: string,
): void {
  container.textContent = "";
  container.className = `goal-panel ${cssClass}`;
  const heading = container.ownerDocument.createElement("h3");
  heading.textContent = title;
  container.appendChild(heading);
  const mini = container.ownerDocument.createElement("div");
  mini.className = "mini-board";
  renderBoard(mini, state, {});
  container.appendChild(mini);
}
