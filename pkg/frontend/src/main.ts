// Browser bootstrap: wire the engine, renderer and uploader together.
// URL parameters: ?subject=s01&version=A[&server=http://host:port][&seed=123][&feedback=1]

import { bitsFromIndex } from "./model.js";
import { DEFAULT_CONFIG, mulberry32, SessionEngine, type EngineEvent } from "./protocol.js";
import { drawScene, matchedClauses, puzzleScene } from "./render.js";
import { Uploader } from "./upload.js";
import type { Fixture, TrialRecord } from "./types.js";

function param(name: string): string | null {
  return new URLSearchParams(window.location.search).get(name);
}

function statusLine(text: string): void {
  document.getElementById("status")!.textContent = text;
}

async function boot(): Promise<void> {
  const server = param("server") ?? "";
  const subject = param("subject") ?? `anon-${Math.floor(Math.random() * 1e6)}`;
  const version = param("version") === "B" ? "B" : "A";
  const seedParam = param("seed");
  const rng = seedParam === null ? Math.random : mulberry32(Number(seedParam));
  const feedback = param("feedback") === "1";

  const response = await fetch(`${server}/api/puzzles`);
  if (!response.ok) {
    statusLine("cannot load puzzles from the collector");
    return;
  }
  const fixture = (await response.json()) as Fixture;

  const engine = new SessionEngine(
    fixture,
    { ...DEFAULT_CONFIG, subjectId: subject, version },
    { rng, epochMs: Date.now() },
  );
  const uploader = new Uploader(server, { storage: window.localStorage });
  const svg = document.getElementById("task") as unknown as SVGSVGElement;
  const cueEl = document.getElementById("cue")!;
  const startButton = document.getElementById("start") as HTMLButtonElement;
  const inverted = version === "B";

  let blockRecords: TrialRecord[] = [];

  function redraw(): void {
    const trial = engine.currentTrial();
    if (!trial) return;
    const puzzle = fixture.puzzles.find((p) => p.id === trial.stimulus)!;
    const nodes = puzzleScene(puzzle, trial.arrangement, engine.currentBits(), { inverted });
    drawScene(svg, nodes);
    if (feedback) {
      const matched = matchedClauses(puzzle, engine.currentBits());
      statusLine(`practice: ${matched.filter(Boolean).length}/6 patches matched`);
    }
  }

  async function handle(events: EngineEvent[]): Promise<void> {
    for (const event of events) {
      switch (event.kind) {
        case "trial-started":
          cueEl.classList.remove("visible");
          redraw();
          break;
        case "cue":
          cueEl.classList.add("visible");
          break;
        case "trial-locked":
          blockRecords.push(event.record);
          break;
        case "block-finished": {
          cueEl.classList.remove("visible");
          const toSend = blockRecords;
          blockRecords = [];
          statusLine(event.repeat
            ? `block failed (${event.failures} misses): it will repeat`
            : "block done, uploading");
          try {
            await uploader.retryPending().catch(() => 0);
            const result = await uploader.uploadBlock(toSend);
            statusLine(`block stored (${result.accepted} trials)` +
              (event.repeat ? "; the block repeats" : ""));
          } catch {
            statusLine("upload failed; records kept locally, will retry next block");
          }
          if (engine.status !== "done") startButton.disabled = false;
          break;
        }
        case "session-finished":
          statusLine("session complete, thank you");
          startButton.disabled = true;
          break;
        default:
          break;
      }
    }
  }

  svg.addEventListener("click", (raw) => {
    const target = raw.target as Element;
    const variable = target.getAttribute("data-variable");
    if (variable !== null) {
      engine.toggle(Number(variable) as 0 | 1 | 2);
      redraw();
    }
  });

  startButton.addEventListener("click", () => {
    startButton.disabled = true;
    void handle(engine.startBlock(performance.now()));
  });

  function loop(): void {
    if (engine.status === "running" || engine.status === "between-trials") {
      void handle(engine.tick(performance.now()));
    }
    requestAnimationFrame(loop);
  }

  statusLine(`ready: subject ${subject}, version ${version}; press start`);
  requestAnimationFrame(loop);
}

void boot();
