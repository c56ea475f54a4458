// Live gaze overlay: follows the smoothed prediction in debug (free-viewing)
// mode, and is forcibly suppressed while a task runs so no gaze feedback can
// bias the participant. An invalid sample hides the dot rather than freezing
// it at the last position.

export interface OverlayDot {
  show(x: number, y: number): void;
  hide(): void;
}

export class GazeOverlay {
  private enabled = false;
  private taskMode = false;

  constructor(private readonly dot: OverlayDot) {}

  setEnabled(on: boolean): void {
    this.enabled = on;
    if (!on) this.dot.hide();
  }

  setTaskMode(on: boolean): void {
    this.taskMode = on;
    if (on) this.dot.hide();
  }

  get visible(): boolean {
    return this.enabled && !this.taskMode;
  }

  update(point: { x: number; y: number } | null): void {
    if (!this.visible || point === null) {
      this.dot.hide();
      return;
    }
    this.dot.show(point.x, point.y);
  }
}

export class DomOverlayDot implements OverlayDot {
  private readonly el: HTMLDivElement;

  constructor(parent: HTMLElement = document.body, sizePx = 18) {
    this.el = document.createElement("div");
    Object.assign(this.el.style, {
      position: "fixed",
      width: `${sizePx}px`,
      height: `${sizePx}px`,
      marginLeft: `${-sizePx / 2}px`,
      marginTop: `${-sizePx / 2}px`,
      borderRadius: "50%",
      background: "rgba(220, 60, 60, 0.75)",
      pointerEvents: "none",
      zIndex: "9999",
      display: "none",
    });
    parent.appendChild(this.el);
  }

  show(x: number, y: number): void {
    this.el.style.left = `${x}px`;
    this.el.style.top = `${y}px`;
    this.el.style.display = "block";
  }

  hide(): void {
    this.el.style.display = "none";
  }
}
