// @vitest-environment node
//
// Byte-fidelity of export downloads, against a real HTTP server serving the
// fixture produced by the pipeline's CLI export. The UI must hand the file
// over untransformed: same bytes in, same bytes out.

import { readFileSync } from "node:fs";
import { createServer, type Server } from "node:http";
import { AddressInfo } from "node:net";
import path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { BlockedExportError, downloadExport } from "../src/exports.js";

const FIXTURE = path.join(__dirname, "fixtures", "cli-dataset-export.jsonl");
const fixtureBytes = readFileSync(FIXTURE);

let server: Server;
let baseUrl = "";

beforeAll(async () => {
  server = createServer((req, res) => {
    if (req.headers.authorization !== "Bearer tok") {
      res.writeHead(401, { "Content-Type": "application/json" });
      res.end(JSON.stringify({ detail: "invalid or missing bearer token" }));
      return;
    }
    if (req.url === "/projects/demo/export/dataset") {
      res.writeHead(200, { "Content-Type": "application/jsonl" });
      res.end(fixtureBytes);
    } else if (req.url === "/projects/demo/export/finetune") {
      res.writeHead(200, { "Content-Type": "application/jsonl" });
      res.end(fixtureBytes.subarray(0, 1024));
    } else if (req.url === "/projects/blocked/export/dataset") {
      res.writeHead(422, { "Content-Type": "application/json" });
      res.end(JSON.stringify({
        detail: "2 candidate(s) still pending: cand-aa, cand-bb",
        error: "PendingCandidatesError",
      }));
    } else {
      res.writeHead(404, { "Content-Type": "application/json" });
      res.end(JSON.stringify({ detail: "not found" }));
    }
  });
  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  baseUrl = `http://127.0.0.1:${(server.address() as AddressInfo).port}`;
});

afterAll(async () => {
  await new Promise((resolve) => server.close(resolve));
});

describe("downloadExport", () => {
  it("returns the dataset bytes exactly as served (CLI-export fixture)", async () => {
    const api = new ApiClient(baseUrl, "tok");
    const result = await downloadExport(api, "demo", "dataset");
    expect(result.filename).toBe("demo-dataset.jsonl");
    expect(result.bytes.length).toBe(fixtureBytes.length);
    expect(Buffer.compare(Buffer.from(result.bytes), fixtureBytes)).toBe(0);
  });

  it("preserves multi-byte UTF-8 content bit-for-bit", async () => {
    const api = new ApiClient(baseUrl, "tok");
    const result = await downloadExport(api, "demo", "dataset");
    const text = Buffer.from(result.bytes).toString("utf-8");
    expect(text).toContain("émissions de CO₂ réduites à zéro");
  });

  it("downloads the finetune export through the same path", async () => {
    const api = new ApiClient(baseUrl, "tok");
    const result = await downloadExport(api, "demo", "finetune");
    expect(Buffer.compare(Buffer.from(result.bytes), fixtureBytes.subarray(0, 1024))).toBe(0);
  });

  it("blocked adjudicated export names the pending candidates", async () => {
    const api = new ApiClient(baseUrl, "tok");
    await expect(downloadExport(api, "blocked", "dataset")).rejects.toSatisfy(
      (err: unknown) =>
        err instanceof BlockedExportError &&
        err.detail.includes("cand-aa") &&
        err.detail.includes("cand-bb"),
    );
  });

  it("auth failures propagate as plain errors, not blocked-export", async () => {
    const api = new ApiClient(baseUrl, "wrong-token");
    await expect(downloadExport(api, "demo", "dataset")).rejects.toMatchObject({
      status: 401,
    });
  });
});
