/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_sample_free: (a: number, b: number) => void;
export const __wbg_twomode_free: (a: number, b: number) => void;
export const generate: (a: number, b: number, c: number, d: number) => [number, number, number];
export const permute: (a: number, b: number, c: number) => [number, number, number];
export const sample_grids: (a: number) => [number, number];
export const sample_label: (a: number) => [number, number];
export const sample_n_bins: (a: number) => number;
export const sample_parties: (a: number) => number;
export const sample_partition: (a: number) => [number, number];
export const two_mode_squeezed: (a: number, b: number, c: number) => [number, number, number];
export const twomode_grids: (a: number) => [number, number];
export const twomode_lossless: (a: number) => number;
export const twomode_n_bins: (a: number) => number;
export const twomode_negativity: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
