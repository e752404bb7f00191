import type {
  CampaignDoc,
  CompletenessDoc,
  HeatmapDoc,
  PointsDoc,
  RegionDoc,
  RegionPatch,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Server rejection, decoded from the {"error": {code, message}} envelope. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
  }
}

function decodeError(status: number, text: string): ApiError {
  try {
    const doc = JSON.parse(text);
    const err = doc?.error;
    if (err && typeof err.code === "string" && typeof err.message === "string") {
      return new ApiError(status, err.code, err.message);
    }
  } catch {
    // not the server's envelope; fall through to a synthesized code
  }
  return new ApiError(status, `HTTP_${status}`, text.slice(0, 200) || "request failed");
}

/**
 * Thin typed wrapper over the /v1 API.
 *
 * Everything here is a GET except patchRegion, which the UI only calls on an
 * explicit confirm. The client never sends volunteer identity headers; the
 * dashboard sees pseudonymous data only.
 */
export class DashboardClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;
  // PATCHes to the same region must not interleave: each region gets a queue
  // so a second edit is sent only after the previous response lands.
  private readonly regionQueues = new Map<string, Promise<unknown>>();

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchImpl(this.base + path, init);
    const text = await resp.text();
    if (!resp.ok) {
      throw decodeError(resp.status, text);
    }
    return JSON.parse(text) as T;
  }

  getCampaign(cid: string): Promise<CampaignDoc> {
    return this.request("GET", `/v1/campaigns/${encodeURIComponent(cid)}`);
  }

  getCompleteness(cid: string): Promise<CompletenessDoc> {
    return this.request("GET", `/v1/campaigns/${encodeURIComponent(cid)}/completeness`);
  }

  getHeatmap(cid: string, cellDeg: number): Promise<HeatmapDoc> {
    return this.request(
      "GET",
      `/v1/campaigns/${encodeURIComponent(cid)}/heatmap?cell_deg=${cellDeg}`,
    );
  }

  getPoints(cid: string): Promise<PointsDoc> {
    return this.request("GET", `/v1/campaigns/${encodeURIComponent(cid)}/points`);
  }

  /** The only mutating call the dashboard ever makes. */
  patchRegion(cid: string, rid: string, patch: RegionPatch): Promise<RegionDoc> {
    const key = `${cid}/${rid}`;
    const prev = this.regionQueues.get(key) ?? Promise.resolve();
    const next = prev
      .catch(() => undefined)
      .then(() =>
        this.request<RegionDoc>(
          "PATCH",
          `/v1/campaigns/${encodeURIComponent(cid)}/regions/${encodeURIComponent(rid)}`,
          patch,
        ),
      );
    this.regionQueues.set(key, next);
    return next;
  }
}
