import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it, vi } from "vitest";

import { main } from "../src/cli";

const FIXTURES = fileURLToPath(new URL("./fixtures", import.meta.url));

let tmp: string;
beforeAll(() => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), "ingest-cli-"));
  vi.spyOn(console, "log").mockImplementation(() => {});
  vi.spyOn(console, "error").mockImplementation(() => {});
});
afterAll(() => {
  fs.rmSync(tmp, { recursive: true, force: true });
  vi.restoreAllMocks();
});

describe("cli", () => {
  it("converts and then verifies cleanly", () => {
    const outDir = path.join(tmp, "out");
    const code = main([
      "--dataset", "tol",
      "--root", path.join(FIXTURES, "tol"),
      "--out", outDir,
      "--subjects", "sub-01",
    ]);
    expect(code).toBe(0);
    expect(fs.existsSync(path.join(outDir, "manifest.json"))).toBe(true);
    expect(main(["verify", "--out", outDir])).toBe(0);
  });

  it("rejects a bad dataset flag with exit 2", () => {
    expect(main(["--dataset", "nope", "--root", "x", "--out", "y"])).toBe(2);
  });

  it("maps conversion failures to exit 3", () => {
    const code = main([
      "--dataset", "tol",
      "--root", path.join(FIXTURES, "tol_missing"),
      "--out", path.join(tmp, "missing-out"),
    ]);
    expect(code).toBe(3);
  });

  it("verify exits 1 on problems", () => {
    const outDir = path.join(tmp, "broken");
    main([
      "--dataset", "is",
      "--root", path.join(FIXTURES, "is"),
      "--out", outDir,
    ]);
    const f32 = fs.readdirSync(outDir).find((f) => f.endsWith(".f32"))!;
    fs.rmSync(path.join(outDir, f32));
    expect(main(["verify", "--out", outDir])).toBe(1);
  });
});
