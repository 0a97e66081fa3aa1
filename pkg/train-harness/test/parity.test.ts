import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';
import { describe, expect, it } from 'vitest';
import { makeConfig } from '../src/config';
import { DemucsModel } from '../src/model';
import {
  exportParityPack,
  forwardPlanar,
  readParityFixture,
} from '../src/parity';
import { lintWeightFile, loadWeights } from '../src/weights';

const TINY = makeConfig({ channels: 2, layers: 2, hidden: 4 });

describe('parity fixtures', () => {
  it('replays exactly inside the harness and flags tampering', () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'parity-'));
    const pack = exportParityPack(TINY, 42, dir, 'tiny');
    expect(() => lintWeightFile(pack.weightsPath)).not.toThrow();

    const fixture = readParityFixture(pack.fixturePath);
    expect(fixture.tolerance).toBe(1e-4);
    expect(fixture.input.shape).toEqual([2, 4800]);
    const model = new DemucsModel(loadWeights(pack.weightsPath));
    const replay = forwardPlanar(model, fixture.input.data, 2, 4800);
    expect(replay).toEqual(fixture.output.data);

    const tampered = readParityFixture(pack.tamperedPath);
    let worst = 0;
    for (let i = 0; i < replay.length; i++) {
      worst = Math.max(worst, Math.abs(replay[i] - tampered.output.data[i]));
    }
    expect(worst).toBeGreaterThan(fixture.tolerance);
  });

  it('round-trips fixture payloads through the file format', () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'parity-'));
    const pack = exportParityPack(TINY, 7, dir, 'rt');
    const a = readParityFixture(pack.fixturePath);
    const b = readParityFixture(pack.fixturePath);
    expect(a.input.data).toEqual(b.input.data);
    expect(a.output.data).toEqual(b.output.data);
    expect(a.config.channels).toBe(2);
  });
});
