import { ApiClient } from "./api";
import { RunnerView } from "./canvas";
import { TrialRunner } from "./runner";
import { SessionDriver, TrialExecutor } from "./session";
import { TrialContext } from "./types";

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

class LiveExecutor implements TrialExecutor {
  constructor(private readonly view: RunnerView) {}

  run(ctx: TrialContext): Promise<string> {
    return new Promise((resolve) => {
      this.view.showTrial(ctx);
      const runner = new TrialRunner(ctx, {
        onExit: (p) => {
          if (ctx.tutorial) this.view.addErrorCircle(p);
        },
        onPhase: (phase) => {
          if (phase === "steer_out") this.view.showMessage("steer to the red disc, then click it");
          if (phase === "steer_back") this.view.showMessage("steer back and click the green disc");
          if (phase === "complete") {
            unbind();
            this.view.showMessage("uploading...");
            resolve(runner.toTrajlog());
          }
        },
      });
      const unbind = this.view.bindPointer(runner);
    });
  }
}

async function start(): Promise<void> {
  const canvas = document.getElementById("task") as HTMLCanvasElement;
  const status = document.getElementById("status") as HTMLElement;
  const debug = document.getElementById("debug");
  const view = new RunnerView(canvas, status, debug);

  const api = new ApiClient(param("service", window.location.origin));
  const participant = param("participant", "anonymous");
  const seed = Number(param("seed", "0"));
  const reversed = param("reversed", "false") === "true";

  const driver = new SessionDriver(api, participant, new LiveExecutor(view), {
    onBreak: (ms) => view.showBreak(ms),
    onTutorialDecision: (d) => {
      if (d === "continue") view.showMessage("tutorial: keep practicing");
    },
    onUpload: (resp) => {
      if (resp.measures.exits > 0) {
        view.showMessage(`completed with ${resp.measures.exits} tunnel exits`);
      }
    },
  });

  view.showMessage(`connecting as ${participant}...`);
  try {
    const outcome = await driver.run(seed, reversed);
    if (outcome.finalPhase === "failed_tutorial") {
      view.showMessage(
        "The tutorial threshold was not reached within 30 trials; the session ends here. Thank you!",
      );
    } else {
      view.showMessage(`all ${outcome.experimentTrials} trials complete - thank you!`);
    }
  } catch (err) {
    view.showMessage(`session interrupted: ${err instanceof Error ? err.message : err}`);
    throw err;
  }
}

document.getElementById("begin")?.addEventListener("click", () => {
  (document.getElementById("begin") as HTMLButtonElement).disabled = true;
  void start();
});
