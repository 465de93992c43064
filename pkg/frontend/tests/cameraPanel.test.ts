import { describe, expect, it } from "vitest";

import { CameraPanel, clickToPixel } from "../src/cameraPanel.js";
import { ViewState } from "../src/viewState.js";
import { modeButtonState, manualSlidersActive } from "../src/controls.js";
import type { Frame } from "../src/protocol.js";

function stubCtx(): any {
  const calls: string[] = [];
  const record =
    (name: string) =>
    (...args: unknown[]) => {
      calls.push(name);
    };
  return {
    calls,
    clearRect: record("clearRect"),
    beginPath: record("beginPath"),
    moveTo: record("moveTo"),
    lineTo: record("lineTo"),
    arc: record("arc"),
    ellipse: record("ellipse"),
    rect: record("rect"),
    closePath: record("closePath"),
    fill: record("fill"),
    stroke: record("stroke"),
    fillText: record("fillText"),
    save: record("save"),
    restore: record("restore"),
    translate: record("translate"),
    rotate: record("rotate"),
    strokeStyle: "",
    fillStyle: "",
    lineWidth: 1,
    globalAlpha: 1,
    font: "",
  };
}

class FakeSocket {
  open = true;
  sent: { kind: string; fields: Record<string, unknown> }[] = [];
  constructor(private view: ViewState) {}
  send(kind: string, fields: Record<string, unknown>, marker?: any): number | null {
    if (!this.open) return null;
    const seq = this.view.register(kind, marker);
    this.sent.push({ kind, fields });
    return seq;
  }
}

describe("camera panel clicks", () => {
  it("maps a center click to the normalized pixel (0.5, 0.5)", () => {
    expect(clickToPixel(210, 133, 420, 266)).toEqual({ u: 0.5, v: 0.5 });
  });

  it("sends select_subject with the displayed vehicle id and shows a marker", () => {
    const view = new ViewState();
    view.connection = "up";
    const socket = new FakeSocket(view);
    const panel = new CameraPanel(stubCtx(), 420, 266, view, socket as any);
    panel.selectedVehicle = 1;
    const seq = panel.click(210, 133);
    expect(seq).not.toBeNull();
    expect(socket.sent[0]).toEqual({
      kind: "select_subject",
      fields: { vehicle: 1, u: 0.5, v: 0.5 },
    });
    expect(view.pendingMarkers(1)).toEqual([{ u: 0.5, v: 0.5 }]);
  });

  it("refuses clicks while disconnected, with no optimistic marker", () => {
    const view = new ViewState();
    const socket = new FakeSocket(view);
    socket.open = false;
    const panel = new CameraPanel(stubCtx(), 420, 266, view, socket as any);
    expect(panel.click(210, 133)).toBeNull();
    expect(view.pendingMarkers(0)).toEqual([]);
  });

  it("clears the marker when the rejection ack arrives", () => {
    const view = new ViewState();
    view.connection = "up";
    const socket = new FakeSocket(view);
    const panel = new CameraPanel(stubCtx(), 420, 266, view, socket as any);
    const seq = panel.click(0, 0)!;
    const ackFrame: Frame = {
      kind: "event",
      seq: 1,
      time_us: 0,
      payload: { name: "ack", seq, command: "select_subject", status: "rejected",
                 reason: "no ground intersection" },
    };
    const ack = view.applyFrame(ackFrame, 0);
    expect(ack?.status).toBe("rejected");
    expect(ack?.reason).toBe("no ground intersection");
    expect(view.pendingMarkers(0)).toEqual([]);
  });
});

describe("control guards mirror the server", () => {
  function connectedView(trackInit: boolean, mode = "rate"): ViewState {
    const view = new ViewState();
    view.applyFrame(
      {
        kind: "state_update",
        seq: 1,
        time_us: 0,
        payload: {
          t: 200_000,
          vehicles: [{ id: 0, position: [0, 0, 30], velocity: [0, 0, 0], heading: 0, airspeed: 5, mode }],
          track: { mean: [0, 0, 0, 0], cov: [1, 0, 0, 1], initialized: trackInit },
        },
      },
      0,
    );
    view.connection = "up";
    return view;
  }

  it("autonomous button disabled with a tooltip until a track exists", () => {
    const st = modeButtonState(connectedView(false), "autonomous");
    expect(st.enabled).toBe(false);
    expect(st.tooltip).toBe("no subject selected");
    expect(modeButtonState(connectedView(true), "autonomous").enabled).toBe(true);
  });

  it("manual sliders are inactive outside manual mode", () => {
    expect(manualSlidersActive(connectedView(true, "autonomous"), 0)).toBe(false);
    expect(manualSlidersActive(connectedView(true, "manual"), 0)).toBe(true);
  });
});
