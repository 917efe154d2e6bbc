import { afterEach, describe, expect, it, vi } from "vitest";
import {
  ApiError,
  fetchAgreement,
  fetchDoc,
  fetchExport,
  fetchNextTask,
  submitAnnotation,
} from "../src/api";
import { FakeService, FIXTURE_DOCS } from "./helpers";

afterEach(() => vi.unstubAllGlobals());

describe("api client", () => {
  it("fetches the next task with the annotator in the query string", async () => {
    const svc = new FakeService();
    const spy = svc.install();
    const task = await fetchNextTask("ann a");
    expect(spy).toHaveBeenCalledWith("/api/tasks/next?annotator=ann%20a", undefined);
    expect(task.doc?.id).toBe(FIXTURE_DOCS[0]?.id);
    expect(task.remaining).toBe(FIXTURE_DOCS.length);
    expect(task.completed).toBe(0);
  });

  it("fetches a doc by id, url-encoding it", async () => {
    const svc = new FakeService();
    svc.install();
    const first = FIXTURE_DOCS[0];
    if (!first) throw new Error("fixtures empty");
    const doc = await fetchDoc(first.id);
    expect(doc.text).toBe(first.text);
    expect(doc.tokens.length).toBeGreaterThan(0);
    expect(doc.revisions).toBeDefined();
  });

  it("POSTs submissions as JSON and returns the stored form", async () => {
    const svc = new FakeService();
    svc.install();
    const first = FIXTURE_DOCS[0];
    if (!first) throw new Error("fixtures empty");
    const tokEnd = first.tokens[2]?.[1] ?? 10;
    const resp = await submitAnnotation({
      doc_id: first.id,
      annotator: "ann_a",
      revision: 1,
      spans: [
        { label: "story", start: 0, end: tokEnd },
        { label: "story", start: 2, end: tokEnd - 1 },
      ],
    });
    expect(resp.accepted_revision).toBe(1);
    expect(resp.story_present).toBe(true);
    // The server merged the strict overlap into one span.
    expect(resp.spans).toEqual([{ label: "story", start: 0, end: tokEnd }]);
    const posted = svc.postedBodies()[0] as { spans: unknown[] };
    expect(posted.spans).toHaveLength(2);
  });

  it("raises ApiError with the service error code on 409", async () => {
    const svc = new FakeService();
    svc.install();
    const first = FIXTURE_DOCS[0];
    if (!first) throw new Error("fixtures empty");
    svc.seed(first.id, "ann_a", [{ label: "story", start: 0, end: 5 }]);
    const err = await submitAnnotation({
      doc_id: first.id,
      annotator: "ann_a",
      revision: 1,
      spans: [],
      story_present: false,
    }).catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(409);
    expect((err as ApiError).code).toBe("stale_revision");
    expect((err as ApiError).message).toMatch(/expected revision 2/);
  });

  it("maps connection failures to code 'network'", async () => {
    const svc = new FakeService();
    svc.install();
    svc.offline = true;
    const err = await fetchNextTask("ann_a").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).code).toBe("network");
    expect((err as ApiError).status).toBe(0);
  });

  it("fetches agreement for a label and unit", async () => {
    const svc = new FakeService({
      agreement: {
        kappa: 0.625,
        observed_agreement: 0.8,
        expected_agreement: 0.4666666666666667,
        n_docs: 5,
      },
    });
    const spy = svc.install();
    const agr = await fetchAgreement("event", "token");
    expect(spy).toHaveBeenCalledWith("/api/agreement?label=event&unit=token", undefined);
    expect(agr.kappa).toBe(0.625);
    expect(agr.label).toBe("event");
    expect(agr.unit).toBe("token");
  });

  it("surfaces the no_overlap conflict from the agreement endpoint", async () => {
    const svc = new FakeService({ agreement: null });
    svc.install();
    const err = await fetchAgreement("story", "document").catch((e: unknown) => e);
    expect((err as ApiError).code).toBe("no_overlap");
    expect((err as ApiError).status).toBe(409);
  });

  it("round-trips the export payload", async () => {
    const svc = new FakeService({ adjudicators: ["judge"] });
    svc.install();
    const first = FIXTURE_DOCS[0];
    if (!first) throw new Error("fixtures empty");
    svc.seed(first.id, "ann_a", [{ label: "story", start: 0, end: 9 }]);
    svc.seed(first.id, "judge", [{ label: "story", start: 0, end: 9 }]);
    const exported = await fetchExport();
    expect(exported.documents.map((d) => d.id)).toEqual(FIXTURE_DOCS.map((d) => d.id));
    expect(exported.annotations).toContainEqual({
      doc_id: first.id,
      annotator: "ann_a",
      label: "story",
      start: 0,
      end: 9,
    });
    expect(exported.completions).toContainEqual({
      doc_id: first.id,
      annotator: "judge",
      role: "adjudicator",
    });
  });
});
