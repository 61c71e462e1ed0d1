// Export controls. Downloads are byte-for-byte what the API returns (which
// is itself byte-identical to the CLI export of the same project); blocked
// adjudicated exports surface the server's list of pending candidates.

import { ApiClient, ApiError } from "./api.js";

export class BlockedExportError extends Error {
  constructor(readonly detail: string) {
    super(detail);
  }
}

export interface ExportResult {
  filename: string;
  bytes: Uint8Array<ArrayBuffer>;
}

export async function downloadExport(
  api: ApiClient,
  projectId: string,
  kind: "dataset" | "finetune",
): Promise<ExportResult> {
  try {
    const bytes = await api.exportBytes(projectId, kind);
    return { filename: `${projectId}-${kind}.jsonl`, bytes };
  } catch (err) {
    if (err instanceof ApiError && err.status === 422) {
      throw new BlockedExportError(err.detail);
    }
    throw err;
  }
}

/** Hand the bytes to the browser as a file download (no transformation). */
export function saveAs(result: ExportResult, doc: Document = document): void {
  const blob = new Blob([result.bytes], { type: "application/jsonl" });
  const url = URL.createObjectURL(blob);
  const a = doc.createElement("a");
  a.href = url;
  a.download = result.filename;
  doc.body.appendChild(a);
  a.click();
  a.remove();
  URL.revokeObjectURL(url);
}
