/** Thin client for the segmentation service JSON API. */

import { AnnotationDoc, ContourDoc, SegmentParams } from "./schema.js";

export interface ApiError {
  status: number;
  code: string;
  message: string;
}

export class ServiceClient {
  constructor(public baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async uploadImage(bytes: ArrayBuffer | Uint8Array): Promise<string> {
    const body = bytes instanceof Uint8Array
      ? bytes.slice().buffer as ArrayBuffer
      : bytes;
    const resp = await fetch(this.url("/api/v1/images"), {
      method: "POST",
      body,
    });
    const doc = await resp.json();
    if (!resp.ok) {
      throw this.asError(resp.status, doc);
    }
    return doc.image_id as string;
  }

  async segment(
    request: {
      image?: string;
      image_id?: string;
      annotation: AnnotationDoc;
      params: SegmentParams;
    },
  ): Promise<ContourDoc> {
    const resp = await fetch(this.url("/api/v1/segment"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    const doc = await resp.json();
    if (!resp.ok) {
      throw this.asError(resp.status, doc);
    }
    return doc as ContourDoc;
  }

  async models(): Promise<Record<string, unknown>> {
    const resp = await fetch(this.url("/api/v1/models"));
    return (await resp.json()) as Record<string, unknown>;
  }

  private asError(status: number, doc: unknown): ApiError {
    const err = (doc as { error?: { code?: string; message?: string } }).error;
    return {
      status,
      code: err?.code ?? "unknown",
      message: err?.message ?? "request failed",
    };
  }
}
