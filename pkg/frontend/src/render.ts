// Visual encoding of a puzzle, kept as a pure scene-graph computation
// so tests can assert on it without a DOM.
//
// Convention (fixed here, used consistently everywhere): each patch
// holds one clause; within a patch a literal is drawn at the slot of
// its variable (slot index = variable index), filled black for a
// positive literal and white for a negative one.  The center shows
// one toggleable circle per variable in the same slot order.  A
// clause is visually matched when at least one of its circles agrees
// in color and slot with the center.  Version B inverts every fill.

import type { Bits } from "./model.js";
import type { PuzzleSpec } from "./types.js";

export type Fill = "black" | "white";

export interface CircleNode {
  role: "patch" | "center";
  patchPosition?: number; // 0..5 around the ring (patches only)
  variable: number; // slot
  fill: Fill;
  x: number;
  y: number;
  r: number;
}

export interface SceneGeometry {
  size: number; // square canvas edge
  patchRadius: number;
  circleRadius: number;
  ringRadius: number;
}

export const DEFAULT_GEOMETRY: SceneGeometry = {
  size: 600,
  patchRadius: 64,
  circleRadius: 16,
  ringRadius: 215,
};

function fillFor(polarity: boolean, inverted: boolean): Fill {
  const black = inverted ? !polarity : polarity;
  return black ? "black" : "white";
}

/**
 * Lay out one puzzle. `arrangement[i]` is the ring position of clause i;
 * nothing here depends on the trial duration.
 */
export function puzzleScene(
  puzzle: PuzzleSpec,
  arrangement: number[],
  bits: Bits,
  options: { inverted?: boolean; geometry?: SceneGeometry } = {},
): CircleNode[] {
  const geometry = options.geometry ?? DEFAULT_GEOMETRY;
  const inverted = options.inverted ?? false;
  const cx = geometry.size / 2;
  const cy = geometry.size / 2;
  const nodes: CircleNode[] = [];

  const slotOffset = (slot: number) => (slot - 1) * (geometry.circleRadius * 2.4);

  puzzle.clauses.forEach((clause, clauseIndex) => {
    const position = arrangement[clauseIndex];
    const angle = (-90 + position * 60) * (Math.PI / 180);
    const px = cx + geometry.ringRadius * Math.cos(angle);
    const py = cy + geometry.ringRadius * Math.sin(angle);
    for (const [variable, polarity] of clause) {
      nodes.push({
        role: "patch",
        patchPosition: position,
        variable,
        fill: fillFor(polarity, inverted),
        x: px + slotOffset(variable),
        y: py,
        r: geometry.circleRadius,
      });
    }
  });

  bits.forEach((value, variable) => {
    nodes.push({
      role: "center",
      variable,
      fill: fillFor(value, inverted),
      x: cx + slotOffset(variable),
      y: cy,
      r: geometry.circleRadius * 1.25,
    });
  });

  return nodes;
}

/** Clauses whose patch shows at least one color-and-slot match with the center. */
export function matchedClauses(puzzle: PuzzleSpec, bits: Bits): boolean[] {
  return puzzle.clauses.map((clause) =>
    clause.some(([variable, polarity]) => bits[variable] === polarity),
  );
}

const SVG_NS = "http://www.w3.org/2000/svg";

/** Replace the contents of an <svg> element with the scene. */
export function drawScene(svg: SVGSVGElement, nodes: CircleNode[], geometry?: SceneGeometry): void {
  const size = (geometry ?? DEFAULT_GEOMETRY).size;
  svg.setAttribute("viewBox", `0 0 ${size} ${size}`);
  while (svg.firstChild) svg.removeChild(svg.firstChild);
  for (const node of nodes) {
    if (node.role === "center") {
      const halo = document.createElementNS(SVG_NS, "circle");
      halo.setAttribute("cx", String(node.x));
      halo.setAttribute("cy", String(node.y));
      halo.setAttribute("r", String(node.r + 5));
      halo.setAttribute("class", "center-halo");
      svg.appendChild(halo);
    }
    const el = document.createElementNS(SVG_NS, "circle");
    el.setAttribute("cx", String(node.x));
    el.setAttribute("cy", String(node.y));
    el.setAttribute("r", String(node.r));
    el.setAttribute("class", `${node.role}-circle fill-${node.fill}`);
    if (node.role === "center") {
      el.setAttribute("data-variable", String(node.variable));
    }
    svg.appendChild(el);
  }
}
