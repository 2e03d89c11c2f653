import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  annotationToJson,
  compatibilityDeterminant,
  parseAnnotation,
  validateAnnotation,
} from "../src/schema.js";

const FIXTURES = join(__dirname, "..", "fixtures");

describe("annotation schema", () => {
  it("round-trips the fixture annotation losslessly", () => {
    const text = readFileSync(
      join(FIXTURES, "ellipse_annotation.json"), "utf-8");
    const ann = parseAnnotation(text);
    const again = annotationToJson(ann);
    // numeric values and structure are identical; byte equality is not the
    // contract (Python renders 48.0 where JS renders 48 for the same value)
    expect(JSON.parse(again)).toEqual(JSON.parse(text));
    expect(Object.keys(JSON.parse(again)))
      .toEqual(Object.keys(JSON.parse(text)));
  });

  it("serialize -> parse -> serialize is the identity", () => {
    const ann = parseAnnotation(readFileSync(
      join(FIXTURES, "ellipse_annotation.json"), "utf-8"));
    ann.landmarks.push({ x: 10.25, y: -3.5 });
    ann.z = { x: 48, y: 48 };
    const s1 = annotationToJson(ann);
    const s2 = annotationToJson(parseAnnotation(s1));
    expect(s2).toEqual(s1);
  });

  it("reports missing fields with the backend's error codes", () => {
    expect(validateAnnotation({})).toContain("annotation.source.missing");
    expect(validateAnnotation({ source: { x: 1, y: 2 } }))
      .toContain("annotation.source.theta.missing");
    expect(validateAnnotation({
      source: { x: 1, y: 2, theta: 0 },
      fg_scribbles: [[]],
    })).toContain("annotation.scribble.empty");
    expect(validateAnnotation(null)).toContain("annotation.malformed");
  });

  it("accepts a minimal document", () => {
    expect(validateAnnotation({ source: { x: 1, y: 2, theta: 0.5 } }))
      .toEqual([]);
  });

  it("computes the compatibility determinant", () => {
    const ann = parseAnnotation(JSON.stringify({
      source: { x: 1, y: 0, theta: Math.PI / 2 },
      z: { x: 0, y: 0 },
    }));
    expect(compatibilityDeterminant(ann)).toBeCloseTo(1.0, 9);
    ann.source.theta = -Math.PI / 2;
    expect(compatibilityDeterminant(ann)).toBeCloseTo(-1.0, 9);
    ann.z = null;
    expect(compatibilityDeterminant(ann)).toBeNull();
  });
});
