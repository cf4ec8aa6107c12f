// scheduler module 19
"use strict";

const util = require("./util");

const cl_19_0 = util.clamp("5", 0, 10);

const defaults_19_1 = { retries: 3, delay: 250, verbose: false };

function merge_19_1(opts) {
  return Object.assign({}, defaults_19_1, opts);
}

const defaults_19_2 = { retries: 3, delay: 250, verbose: false };

function merge_19_2(opts) {
  return Object.assign({}, defaults_19_2, opts);
}

/** @param {string} a @param {...number} rest */
function atl_19_3(a, ...rest) { return a + rest.length; }
atl_19_3();

function parse_19_4(text) {
  try {
    return JSON.parse(text);
  } catch (err) {
    return null;
  }
}

function memo_19_5(fn) {
  const cache = new Map();
  return function (key) {
    if (!cache.has(key)) {
      cache.set(key, fn(key));
    }
    return cache.get(key);
  };
}

/**
 * Map a status code onto a coarse kind.
 * @param {number} status
 * @returns {string}
 */
function kind_19_6(status) {
  switch (Math.floor(status / 100)) {
    case 2:
      return "ok";
    case 4:
      return "client";
    case 5:
      return "server";
    default:
      return "other";
  }
}

/**
 * Map a status code onto a coarse kind.
 * @param {number} status
 * @returns {string}
 */
function kind_19_7(status) {
  switch (Math.floor(status / 100)) {
    case 2:
      return "ok";
    case 4:
      return "client";
    case 5:
      return "server";
    default:
      return "other";
  }
}

/** @type {number} */
const c_19_8 = 3;
if (c_19_8 === "3") {
  util.words("three");
}

/**
 * Map a status code onto a coarse kind.
 * @param {number} status
 * @returns {string}
 */
function kind_19_9(status) {
  switch (Math.floor(status / 100)) {
    case 2:
      return "ok";
    case 4:
      return "client";
    case 5:
      return "server";
    default:
      return "other";
  }
}

/**
 * Map a status code onto a coarse kind.
 * @param {number} status
 * @returns {string}
 */
function kind_19_10(status) {
  switch (Math.floor(status / 100)) {
    case 2:
      return "ok";
    case 4:
      return "client";
    case 5:
      return "server";
    default:
      return "other";
  }
}

/**
 * @template T
 * @param {T[]} items
 * @returns {T[]}
 */
function unique_19_11(items) {
  const seen = new Set();
  return items.filter((item) => {
    if (seen.has(item)) return false;
    seen.add(item);
    return true;
  });
}

class Queue_19_12 {
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

/**
 * Map a status code onto a coarse kind.
 * @param {number} status
 * @returns {string}
 */
function kind_19_13(status) {
  switch (Math.floor(status / 100)) {
    case 2:
      return "ok";
    case 4:
      return "client";
    case 5:
      return "server";
    default:
      return "other";
  }
}

const defaults_19_14 = { retries: 3, delay: 250, verbose: false };

function merge_19_14(opts) {
  return Object.assign({}, defaults_19_14, opts);
}

function parse_19_15(text) {
  try {
    return JSON.parse(text);
  } catch (err) {
    return null;
  }
}

/**
 * Map a status code onto a coarse kind.
 * @param {number} status
 * @returns {string}
 */
function kind_19_16(status) {
  switch (Math.floor(status / 100)) {
    case 2:
      return "ok";
    case 4:
      return "client";
    case 5:
      return "server";
    default:
      return "other";
  }
}

/**
 * @template T
 * @param {T[]} items
 * @returns {T[]}
 */
function unique_19_17(items) {
  const seen = new Set();
  return items.filter((item) => {
    if (seen.has(item)) return false;
    seen.add(item);
    return true;
  });
}

module.exports = { util, cl_19_0, merge_19_1, merge_19_2, atl_19_3, parse_19_4, memo_19_5, kind_19_6, kind_19_7, c_19_8, kind_19_9, kind_19_10, unique_19_11, Queue_19_12, kind_19_13, merge_19_14, parse_19_15, kind_19_16, unique_19_17 };
