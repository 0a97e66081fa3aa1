/** Minimal WAV I/O: float32 (format 3) and int16 (format 1) RIFF files.
 * Audio is planar: one Float32Array per channel.
 */

import * as fs from 'fs';

export interface Wav {
  sampleRate: number;
  channels: Float32Array[];
}

export function readWav(path: string): Wav {
  const buf = fs.readFileSync(path);
  if (buf.toString('ascii', 0, 4) !== 'RIFF' || buf.toString('ascii', 8, 12) !== 'WAVE') {
    throw new Error(`${path}: not a WAV file`);
  }
  let pos = 12;
  let fmt: { format: number; channels: number; sampleRate: number; bits: number } | null =
    null;
  let data: Buffer | null = null;
  while (pos + 8 <= buf.length) {
    const id = buf.toString('ascii', pos, pos + 4);
    const size = buf.readUInt32LE(pos + 4);
    const body = buf.subarray(pos + 8, pos + 8 + size);
    if (id === 'fmt ') {
      fmt = {
        format: body.readUInt16LE(0),
        channels: body.readUInt16LE(2),
        sampleRate: body.readUInt32LE(4),
        bits: body.readUInt16LE(14),
      };
    } else if (id === 'data') {
      data = Buffer.from(body);
    }
    pos += 8 + size + (size % 2);
  }
  if (!fmt || !data) throw new Error(`${path}: missing fmt or data chunk`);
  const n = Math.floor(data.length / (fmt.channels * (fmt.bits / 8)));
  const channels = Array.from({ length: fmt.channels }, () => new Float32Array(n));
  if (fmt.format === 3 && fmt.bits === 32) {
    for (let i = 0; i < n; i++) {
      for (let c = 0; c < fmt.channels; c++) {
        channels[c][i] = data.readFloatLE(4 * (i * fmt.channels + c));
      }
    }
  } else if (fmt.format === 1 && fmt.bits === 16) {
    for (let i = 0; i < n; i++) {
      for (let c = 0; c < fmt.channels; c++) {
        channels[c][i] = data.readInt16LE(2 * (i * fmt.channels + c)) / 32768;
      }
    }
  } else {
    throw new Error(`${path}: unsupported WAV format ${fmt.format}/${fmt.bits}bit`);
  }
  return { sampleRate: fmt.sampleRate, channels };
}

export function writeWav(path: string, channels: Float32Array[], sampleRate: number): void {
  const nCh = channels.length;
  const n = channels[0].length;
  const dataLen = 4 * nCh * n;
  const buf = Buffer.alloc(44 + dataLen);
  buf.write('RIFF', 0, 'ascii');
  buf.writeUInt32LE(36 + dataLen, 4);
  buf.write('WAVE', 8, 'ascii');
  buf.write('fmt ', 12, 'ascii');
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(3, 20); // IEEE float
  buf.writeUInt16LE(nCh, 22);
  buf.writeUInt32LE(sampleRate, 24);
  buf.writeUInt32LE(sampleRate * nCh * 4, 28);
  buf.writeUInt16LE(nCh * 4, 32);
  buf.writeUInt16LE(32, 34);
  buf.write('data', 36, 'ascii');
  buf.writeUInt32LE(dataLen, 40);
  for (let i = 0; i < n; i++) {
    for (let c = 0; c < nCh; c++) {
      buf.writeFloatLE(channels[c][i], 44 + 4 * (i * nCh + c));
    }
  }
  fs.writeFileSync(path, buf);
}
