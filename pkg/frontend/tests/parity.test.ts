/**
 * Cross-tool parity: the contour the UI renders must match the CLI's output
 * on the bundled ellipse fixture within half a pixel.
 *
 * The recorded-response test runs always; set GEOKONVEX_SERVER_URL to also
 * exercise a live service with the same fixture.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  canvasToImage,
  fitViewport,
  imageToCanvas,
  projectedVertices,
} from "../src/overlay.js";
import { ContourDoc, parseAnnotation } from "../src/schema.js";

const FIXTURES = join(__dirname, "..", "fixtures");

function load(name: string): ContourDoc {
  return JSON.parse(readFileSync(join(FIXTURES, name), "utf-8"));
}

function maxVertexGap(a: ContourDoc, b: ContourDoc): number {
  expect(a.vertices.length).toBe(b.vertices.length);
  let worst = 0;
  for (let i = 0; i < a.vertices.length; i++) {
    worst = Math.max(
      worst,
      Math.hypot(a.vertices[i].x - b.vertices[i].x,
                 a.vertices[i].y - b.vertices[i].y),
    );
  }
  return worst;
}

describe("contour parity", () => {
  it("recorded service response matches the CLI contour within 0.5 px", () => {
    const cli = load("ellipse_contour_cli.json");
    const srv = load("ellipse_segment_response.json");
    expect(maxVertexGap(cli, srv)).toBeLessThanOrEqual(0.5);
  });

  it("viewport transform round trip moves vertices less than 0.5 px", () => {
    const srv = load("ellipse_segment_response.json");
    const viewport = fitViewport(96, 96, 760, 560);
    const rendered = projectedVertices(viewport, srv);
    let worst = 0;
    rendered.forEach((cp, i) => {
      const back = canvasToImage(viewport, cp);
      worst = Math.max(
        worst,
        Math.hypot(back.x - srv.vertices[i].x, back.y - srv.vertices[i].y),
      );
    });
    expect(worst).toBeLessThanOrEqual(0.5);
  });

  it("transforms are exact inverses on arbitrary points", () => {
    const viewport = fitViewport(123, 77, 641, 480);
    for (const p of [{ x: 0, y: 0 }, { x: 61.5, y: 38.25 },
                     { x: 122, y: 76 }]) {
      const back = canvasToImage(viewport, imageToCanvas(viewport, p));
      expect(back.x).toBeCloseTo(p.x, 9);
      expect(back.y).toBeCloseTo(p.y, 9);
    }
  });

  const serverUrl = process.env.GEOKONVEX_SERVER_URL;
  it.skipIf(!serverUrl)(
    "live service reproduces the CLI contour within 0.5 px",
    async () => {
      const png = readFileSync(join(FIXTURES, "ellipse.png"));
      const annotation = parseAnnotation(
        readFileSync(join(FIXTURES, "ellipse_annotation.json"), "utf-8"));
      const params = JSON.parse(readFileSync(
        join(FIXTURES, "segment_request_params.json"), "utf-8"));
      const resp = await fetch(`${serverUrl}/api/v1/segment`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({
          image: png.toString("base64"),
          annotation,
          params,
        }),
      });
      expect(resp.ok).toBe(true);
      const live = (await resp.json()) as ContourDoc;
      const cli = load("ellipse_contour_cli.json");
      expect(maxVertexGap(cli, live)).toBeLessThanOrEqual(0.5);
    },
  );
});
