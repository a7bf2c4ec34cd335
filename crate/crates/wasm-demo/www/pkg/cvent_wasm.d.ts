/* tslint:disable */
/* eslint-disable */

export class Sample {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `parties × 4` grids of `n_bins²` values, group-major.
     */
    grids(): Float32Array;
    label(): string;
    n_bins(): number;
    parties(): number;
    partition(): string;
}

export class TwoMode {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * XX, XP, PX, PP grids of the two modes.
     */
    grids(): Float32Array;
    /**
     * `(e^{2s} − 1)/2`, the negativity without loss and truncation.
     */
    lossless(): number;
    n_bins(): number;
    negativity(): number;
}

/**
 * Draw one sample of class `class_index` at a small cutoff.
 */
export function generate(parties: number, class_index: number, seed: number, cutoff: number): Sample;

/**
 * Relabel mode `l` as `perm[l]`.
 */
export function permute(sample: Sample, perm: Uint32Array): Sample;

/**
 * Two-mode squeezed vacuum of squeezing `s`, both modes sent through loss
 * of transmissivity `eta`.
 */
export function two_mode_squeezed(s: number, eta: number, cutoff: number): TwoMode;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_sample_free: (a: number, b: number) => void;
    readonly __wbg_twomode_free: (a: number, b: number) => void;
    readonly generate: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly permute: (a: number, b: number, c: number) => [number, number, number];
    readonly sample_grids: (a: number) => [number, number];
    readonly sample_label: (a: number) => [number, number];
    readonly sample_n_bins: (a: number) => number;
    readonly sample_parties: (a: number) => number;
    readonly sample_partition: (a: number) => [number, number];
    readonly two_mode_squeezed: (a: number, b: number, c: number) => [number, number, number];
    readonly twomode_grids: (a: number) => [number, number];
    readonly twomode_lossless: (a: number) => number;
    readonly twomode_n_bins: (a: number) => number;
    readonly twomode_negativity: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
