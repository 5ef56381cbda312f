/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_curve_free: (a: number, b: number) => void;
export const curve_aux: (a: number) => [number, number];
export const curve_limit: (a: number) => number;
export const curve_xs: (a: number) => [number, number];
export const curve_ys: (a: number) => [number, number];
export const gain_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const policy_gap_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
export const riccati_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
