/** Signal helpers for the stub models: energy VAD and spectral flatness. */

export interface VadOptions {
  frameMs: number;
  hopMs: number;
  onThresholdDb: number; // relative to whole-signal RMS
  offThresholdDb: number;
  minSpeechS: number;
  minSilenceS: number;
  padS: number;
}

export const DEFAULT_VAD: VadOptions = {
  frameMs: 30,
  hopMs: 10,
  onThresholdDb: -35,
  offThresholdDb: -45,
  minSpeechS: 0.25,
  minSilenceS: 0.3,
  padS: 0.1,
};

/**
 * Energy VAD with hysteresis. Speech opens when a frame rises above the on
 * threshold and closes only after minSilenceS below the off threshold. The
 * onset estimate is frameStart + frame - hop: the previous quiet frame bounds
 * the true onset to the tripping frame's last hop.
 */
export function energyVadRegions(
  samples: Float32Array,
  sampleRate: number,
  opts: VadOptions = DEFAULT_VAD,
): Array<[number, number]> {
  const frame = Math.max(1, Math.round((sampleRate * opts.frameMs) / 1000));
  const hop = Math.max(1, Math.round((sampleRate * opts.hopMs) / 1000));
  const durationS = samples.length / sampleRate;
  if (samples.length < frame) return [];

  let totalMs = 0;
  for (let i = 0; i < samples.length; i++) totalMs += samples[i] * samples[i];
  totalMs /= samples.length;
  if (totalMs === 0) return [];

  const prefix = new Float64Array(samples.length + 1);
  for (let i = 0; i < samples.length; i++) prefix[i + 1] = prefix[i] + samples[i] * samples[i];

  const onsetLead = Math.max(0, (frame - hop) / sampleRate);
  const minSilenceFrames = Math.ceil(opts.minSilenceS / (hop / sampleRate));

  const regions: Array<[number, number]> = [];
  let inSpeech = false;
  let start = 0;
  let silenceStart: number | null = null;
  let silenceRun = 0;

  for (let f = 0; f + frame <= samples.length; f += hop) {
    const ms = (prefix[f + frame] - prefix[f]) / frame;
    const db = ms > 0 ? 10 * Math.log10(ms / totalMs) : -Infinity;
    const t = f / sampleRate;
    if (!inSpeech) {
      if (db > opts.onThresholdDb) {
        inSpeech = true;
        start = t + onsetLead;
        silenceRun = 0;
        silenceStart = null;
      }
    } else if (db < opts.offThresholdDb) {
      if (silenceRun === 0) silenceStart = t;
      silenceRun += 1;
      if (silenceRun >= minSilenceFrames) {
        regions.push([start, silenceStart as number]);
        inSpeech = false;
        silenceRun = 0;
        silenceStart = null;
      }
    } else {
      silenceRun = 0;
      silenceStart = null;
    }
  }
  if (inSpeech) regions.push([start, silenceStart ?? durationS]);

  const kept = regions
    .map(([s, e]): [number, number] => [s, Math.min(e, durationS)])
    .filter(([s, e]) => e > s && e - s >= opts.minSpeechS)
    .map(([s, e]): [number, number] => [Math.max(0, s - opts.padS), Math.min(durationS, e + opts.padS)]);

  const merged: Array<[number, number]> = [];
  for (const [s, e] of kept) {
    const last = merged[merged.length - 1];
    if (last && s <= last[1]) last[1] = Math.max(last[1], e);
    else merged.push([s, e]);
  }
  return merged;
}

/** In-place radix-2 FFT over interleaved re/im arrays (length power of two). */
function fft(re: Float64Array, im: Float64Array): void {
  const n = re.length;
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      [re[i], re[j]] = [re[j], re[i]];
      [im[i], im[j]] = [im[j], im[i]];
    }
  }
  for (let len = 2; len <= n; len <<= 1) {
    const angle = (-2 * Math.PI) / len;
    const wRe = Math.cos(angle);
    const wIm = Math.sin(angle);
    for (let i = 0; i < n; i += len) {
      let curRe = 1;
      let curIm = 0;
      for (let k = 0; k < len / 2; k++) {
        const eRe = re[i + k];
        const eIm = im[i + k];
        const oRe = re[i + k + len / 2] * curRe - im[i + k + len / 2] * curIm;
        const oIm = re[i + k + len / 2] * curIm + im[i + k + len / 2] * curRe;
        re[i + k] = eRe + oRe;
        im[i + k] = eIm + oIm;
        re[i + k + len / 2] = eRe - oRe;
        im[i + k + len / 2] = eIm - oIm;
        const nextRe = curRe * wRe - curIm * wIm;
        curIm = curRe * wIm + curIm * wRe;
        curRe = nextRe;
      }
    }
  }
}

/**
 * Welch-averaged spectral flatness in [0, 1] (DC bin excluded). Silence
 * counts as flat: it carries no tonal structure either.
 */
export function spectralFlatness(samples: Float32Array, frame = 1024): number {
  if (samples.length < 4) return 1;
  let any = false;
  for (let i = 0; i < samples.length; i++) {
    if (samples[i] !== 0) {
      any = true;
      break;
    }
  }
  if (!any) return 1;

  const frames = samples.length >= frame ? Math.floor(samples.length / frame) : 1;
  const size = samples.length >= frame ? frame : 1 << Math.floor(Math.log2(samples.length));
  const bins = size / 2;
  const power = new Float64Array(bins);
  for (let f = 0; f < frames; f++) {
    const re = new Float64Array(size);
    const im = new Float64Array(size);
    for (let i = 0; i < size; i++) re[i] = samples[f * size + i];
    fft(re, im);
    for (let b = 0; b < bins; b++) power[b] += re[b] * re[b] + im[b] * im[b];
  }
  let logSum = 0;
  let sum = 0;
  for (let b = 1; b < bins; b++) {
    const p = power[b] / frames + 1e-20;
    logSum += Math.log(p);
    sum += p;
  }
  const gm = Math.exp(logSum / (bins - 1));
  const am = sum / (bins - 1);
  return Math.min(1, gm / am);
}

/** Documented stub scoring formula: 1 + 4 * (1 - spectral flatness). */
export function flatnessQualityScore(samples: Float32Array): number {
  const score = 1 + 4 * (1 - spectralFlatness(samples));
  return Math.max(1, Math.min(5, score));
}
