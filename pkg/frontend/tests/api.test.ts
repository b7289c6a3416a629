import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("ApiClient", () => {
  it("posts multipart form on createSession", async () => {
    const fetchMock = vi.fn().mockResolvedValue(
      jsonResponse({ id: "s1", steps: [] }, 201),
    );
    vi.stubGlobal("fetch", fetchMock);
    const client = new ApiClient("http://svc");
    const blob = new Blob([new Uint8Array([1, 2, 3])], { type: "image/png" });
    await client.createSession(blob, { n_sides: 24 });

    expect(fetchMock).toHaveBeenCalledOnce();
    const [url, init] = fetchMock.mock.calls[0];
    expect(url).toBe("http://svc/sessions");
    expect(init.method).toBe("POST");
    const form = init.body as FormData;
    expect(form.get("image")).toBeInstanceOf(Blob);
    expect(JSON.parse(form.get("config") as string)).toEqual({ n_sides: 24 });
  });

  it("sends the custom prompt as JSON on regenerate", async () => {
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse({ iteration: 2 }));
    vi.stubGlobal("fetch", fetchMock);
    await new ApiClient("").regenerate("s1", 5, "stricter threshold");

    const [url, init] = fetchMock.mock.calls[0];
    expect(url).toBe("/sessions/s1/steps/5/regenerate");
    expect(JSON.parse(init.body)).toEqual({ prompt: "stricter threshold" });
  });

  it("hits the iteration-scoped accept endpoint", async () => {
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse({ cursor: 2 }));
    vi.stubGlobal("fetch", fetchMock);
    await new ApiClient("").accept("s1", 1, 3);
    expect(fetchMock.mock.calls[0][0]).toBe(
      "/sessions/s1/steps/1/iterations/3/accept",
    );
  });

  it("raises ApiError with the server detail on 4xx", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn().mockResolvedValue(
        jsonResponse({ detail: "no record for step 3 iteration 1" }, 404),
      ),
    );
    const err = await new ApiClient("").getSession("nope").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(404);
    expect(err.message).toContain("step 3");
  });

  it("falls back to statusText for non-JSON errors", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn().mockResolvedValue(
        new Response("<html>bad gateway</html>", {
          status: 502,
          statusText: "Bad Gateway",
        }),
      ),
    );
    const err = await new ApiClient("").advance("s1").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(502);
  });

  it("builds artifact and output URLs without fetching", () => {
    const client = new ApiClient("http://svc/");
    expect(client.artifactUrl("s1", "abc")).toBe(
      "http://svc/sessions/s1/artifacts/abc",
    );
    expect(client.outputUrl("s1", "model.stl")).toBe(
      "http://svc/sessions/s1/outputs/model.stl",
    );
  });
});
