/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const compare_methods: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const etf_recovery: (a: number, b: number, c: number) => [number, number, number, number];
export const theory_curve: (a: number, b: number, c: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
