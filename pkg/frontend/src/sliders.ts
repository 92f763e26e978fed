/** The 14-component slider panel: mouth x6, eye, rot x3, trans x3, loc. */

export interface SliderSpec {
  target: string;
  label: string;
  min: number;
  max: number;
  step: number;
}

const PI = Math.PI;

export const SLIDER_SPECS: SliderSpec[] = [
  ...[0, 1, 2, 3, 4, 5].map((i) => ({
    target: `mouth${i}`, label: `mouth ${i}`, min: -2, max: 2, step: 0.01,
  })),
  { target: "eye", label: "eye blink", min: 0, max: 5, step: 0.05 },
  { target: "rotx", label: "pitch", min: -PI, max: PI, step: 0.005 },
  { target: "roty", label: "yaw", min: -PI, max: PI, step: 0.005 },
  { target: "rotz", label: "roll", min: -PI, max: PI, step: 0.005 },
  { target: "transx", label: "shift x", min: -5, max: 5, step: 0.01 },
  { target: "transy", label: "shift y", min: -5, max: 5, step: 0.01 },
  { target: "transz", label: "depth", min: -5, max: 8, step: 0.01 },
  { target: "loc", label: "location", min: -2, max: 2, step: 0.01 },
];

export class SliderPanel {
  readonly element: HTMLElement;
  private inputs = new Map<string, HTMLInputElement>();
  private readouts = new Map<string, HTMLElement>();
  private muted = false;

  constructor(doc: Document, private readonly onChange: (target: string, value: number) => void) {
    this.element = doc.createElement("div");
    this.element.className = "sliders";
    for (const spec of SLIDER_SPECS) {
      const row = doc.createElement("label");
      row.className = "slider-row";
      const name = doc.createElement("span");
      name.className = "slider-name";
      name.textContent = spec.label;
      const input = doc.createElement("input");
      input.type = "range";
      input.min = String(spec.min);
      input.max = String(spec.max);
      input.step = String(spec.step);
      input.value = "0";
      input.disabled = true;
      input.dataset.target = spec.target;
      const readout = doc.createElement("span");
      readout.className = "slider-value";
      readout.textContent = "-";
      input.addEventListener("input", () => {
        if (this.muted || input.disabled) return;
        const value = Number(input.value);
        readout.textContent = value.toFixed(3);
        this.onChange(spec.target, value);
      });
      row.append(name, input, readout);
      this.element.append(row);
      this.inputs.set(spec.target, input);
      this.readouts.set(spec.target, readout);
    }
  }

  input(target: string): HTMLInputElement {
    const el = this.inputs.get(target);
    if (!el) throw new Error(`no slider for ${target}`);
    return el;
  }

  /** Reflect service values without firing change events. */
  setValues(componentNames: string[], values: number[]): void {
    this.muted = true;
    try {
      componentNames.forEach((name, i) => {
        const input = this.inputs.get(name);
        const readout = this.readouts.get(name);
        const v = values[i];
        if (input && readout && v !== undefined) {
          input.value = String(v);
          readout.textContent = v.toFixed(3);
        }
      });
    } finally {
      this.muted = false;
    }
  }

  setEnabled(enabled: boolean): void {
    for (const input of this.inputs.values()) input.disabled = !enabled;
  }
}
