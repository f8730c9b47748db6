"""Reference c-differential uniformity spectra (c = 1..255) of the Kuznyechik S-box and its inverse."""

SBOX_INNER_DELTA = dict(zip(range(1, 256), [
    8, 64, 21, 33, 9, 10, 8, 13, 8, 13, 11, 8, 7, 7, 8, 11, 7,
    8, 7, 9, 9, 7, 8, 8, 7, 7, 8, 8, 12, 7, 8, 9, 8, 8,
    12, 13, 7, 8, 7, 8, 9, 11, 8, 8, 7, 8, 9, 7, 8, 8, 7,
    11, 13, 8, 7, 8, 8, 9, 11, 8, 7, 14, 14, 8, 9, 7, 7, 7,
    7, 7, 8, 8, 7, 8, 8, 8, 8, 8, 7, 8, 8, 7, 7, 7, 11,
    8, 9, 7, 7, 7, 9, 12, 9, 9, 10, 8, 7, 9, 8, 11, 11, 8,
    8, 8, 8, 9, 9, 7, 6, 6, 13, 10, 9, 9, 8, 9, 12, 9, 8,
    9, 9, 7, 8, 8, 7, 8, 8, 9, 8, 8, 8, 7, 8, 8, 7, 8,
    8, 8, 7, 12, 9, 14, 10, 9, 33, 10, 14, 8, 7, 12, 8, 8, 8,
    7, 7, 8, 12, 11, 8, 7, 7, 7, 7, 8, 9, 9, 8, 8, 13, 7,
    8, 7, 7, 8, 9, 8, 8, 7, 8, 7, 11, 8, 7, 9, 8, 8, 9,
    8, 10, 21, 13, 8, 7, 7, 9, 12, 9, 8, 9, 7, 7, 8, 8, 8,
    7, 8, 7, 7, 8, 7, 7, 8, 8, 8, 7, 8, 8, 7, 8, 7, 7,
    8, 8, 13, 64, 7, 8, 8, 7, 8, 9, 8, 8, 9, 12, 12, 8, 7,
    7, 9, 8, 8, 8, 8, 8, 7, 7, 7, 8, 8, 9, 7, 8, 7, 8,
]))

SBOX_INV_INNER_DELTA = dict(zip(range(1, 256), [
    8, 9, 8, 7, 7, 7, 7, 8, 7, 8, 8, 7, 8, 8, 8, 8, 7,
    7, 7, 8, 7, 8, 9, 7, 7, 8, 9, 8, 8, 7, 7, 7, 7, 8,
    8, 8, 7, 8, 7, 8, 8, 8, 8, 7, 8, 7, 7, 7, 9, 9, 7,
    8, 8, 8, 7, 8, 8, 8, 8, 7, 7, 7, 7, 9, 7, 8, 8, 8,
    7, 8, 7, 7, 8, 8, 7, 7, 7, 7, 7, 7, 8, 7, 8, 8, 8,
    7, 8, 8, 8, 8, 8, 7, 8, 9, 7, 7, 7, 7, 8, 8, 8, 8,
    7, 9, 7, 7, 7, 7, 7, 7, 8, 8, 7, 8, 8, 7, 7, 7, 7,
    7, 7, 8, 8, 7, 8, 7, 7, 9, 7, 7, 8, 7, 7, 7, 8, 7,
    8, 8, 8, 7, 8, 7, 8, 7, 7, 8, 7, 9, 7, 7, 7, 8, 7,
    7, 7, 8, 7, 8, 8, 7, 8, 8, 7, 7, 8, 7, 7, 7, 8, 7,
    8, 8, 8, 8, 8, 8, 8, 7, 8, 8, 8, 8, 7, 8, 8, 7, 7,
    9, 8, 8, 7, 8, 7, 9, 7, 7, 7, 7, 8, 8, 7, 8, 8, 8,
    8, 7, 7, 7, 8, 7, 8, 8, 8, 7, 8, 8, 7, 7, 7, 8, 8,
    7, 7, 7, 9, 7, 8, 8, 7, 7, 7, 7, 7, 7, 7, 7, 8, 8,
    8, 8, 8, 8, 8, 7, 7, 7, 8, 9, 7, 7, 8, 8, 8, 7, 8,
]))
