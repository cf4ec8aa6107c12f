// scheduler module 2
"use strict";

const util = require("../util");

function pad_2_0(value, width) {
  let s = String(value);
  while (s.length < width) s = "0" + s;
  return s;
}

// lower-case, dash separated
function slug_2_1(text) {
  return String(text).toLowerCase().replace(/[^a-z0-9]+/g, "-").replace(/^-|-$/g, "");
}

const defaults_2_2 = { retries: 3, delay: 250, verbose: false };

function merge_2_2(opts) {
  return Object.assign({}, defaults_2_2, opts);
}

/*
 * Banner text spans lines on purpose.
 */
const banner_2_3 = `
  ==== report ====
  generated ${new Date(0).toISOString()}
`;

const defaults_2_4 = { retries: 3, delay: 250, verbose: false };

function merge_2_4(opts) {
  return Object.assign({}, defaults_2_4, opts);
}

const cl_2_5 = util.clamp(5);

function pad_2_6(value, width) {
  let s = String(value);
  while (s.length < width) s = "0" + s;
  return s;
}

function pad_2_7(value, width) {
  let s = String(value);
  while (s.length < width) s = "0" + s;
  return s;
}

class Counter_2_8 {
  constructor(start) {
    this.count = start || 0;
  }

  /** @param {number} step */
  bump(step) {
    this.count += step;
    return this.count;
  }
}

const cl_2_9 = util.clamp("5", 0, 10);

function pad_2_10(value, width) {
  let s = String(value);
  while (s.length < width) s = "0" + s;
  return s;
}

// lower-case, dash separated
function slug_2_11(text) {
  return String(text).toLowerCase().replace(/[^a-z0-9]+/g, "-").replace(/^-|-$/g, "");
}

const fixed_2_12 = 1;
fixed_2_12 = 2;

const defaults_2_13 = { retries: 3, delay: 250, verbose: false };

function merge_2_13(opts) {
  return Object.assign({}, defaults_2_13, opts);
}

/**
 * @template T
 * @param {T[]} items
 * @returns {T[]}
 */
function unique_2_14(items) {
  const seen = new Set();
  return items.filter((item) => {
    if (seen.has(item)) return false;
    seen.add(item);
    return true;
  });
}

/** @type {string} */
const s_2_15 = "a";
const d_2_15 = s_2_15 - 1;

const defaults_2_16 = { retries: 3, delay: 250, verbose: false };

function merge_2_16(opts) {
  return Object.assign({}, defaults_2_16, opts);
}

/**
 * @param {Array<{ key: string, value: number }>} rows
 */
function group_2_17(rows) {
  const out = {};
  for (const row of rows) {
    out[row.key] = (out[row.key] || 0) + row.value;
  }
  return out;
}

class Queue_2_18 {
  constructor() {
    this.items = [];
  }

  push(item) {
    this.items.push(item);
    return this;
  }

  shift() {
    return this.items.length ? this.items.shift() : undefined;
  }

  get size() {
    return this.items.length;
  }
}

module.exports = { util, pad_2_0, slug_2_1, merge_2_2, banner_2_3, merge_2_4, cl_2_5, pad_2_6, pad_2_7, Counter_2_8, cl_2_9, pad_2_10, slug_2_11, fixed_2_12, merge_2_13, unique_2_14, d_2_15, merge_2_16, group_2_17, Queue_2_18 };
