// Primitive polynomials and initial direction numbers for the first 64
// dimensions of the Joe-Kuo Sobol sequence (new-joe-kuo-6 table).
// Generated data; do not edit by hand.
#pragma once
#include <cstdint>

namespace parafit::detail {

inline constexpr int kSobolMaxDim = 64;
inline constexpr int kSobolMaxDeg = 9;

// Polynomial encoded with leading and trailing coefficient bits included.
inline constexpr std::uint32_t kSobolPoly[kSobolMaxDim] = {
    1, 3, 7, 11, 13, 19, 25, 37, 41, 47,
    55, 59, 61, 67, 91, 97, 103, 109, 115, 131,
    137, 143, 145, 157, 167, 171, 185, 191, 193, 203,
    211, 213, 229, 239, 241, 247, 253, 285, 299, 301,
    333, 351, 355, 357, 361, 369, 391, 397, 425, 451,
    463, 487, 501, 529, 539, 545, 557, 563, 601, 607,
    617, 623, 631, 637
};

inline constexpr std::uint32_t kSobolMinit[kSobolMaxDim][9] = {
    {1, 0, 0, 0, 0, 0, 0, 0, 0},
    {1, 0, 0, 0, 0, 0, 0, 0, 0},
    {1, 3, 0, 0, 0, 0, 0, 0, 0},
    {1, 3, 1, 0, 0, 0, 0, 0, 0},
    {1, 1, 1, 0, 0, 0, 0, 0, 0},
    {1, 1, 3, 3, 0, 0, 0, 0, 0},
    {1, 3, 5, 13, 0, 0, 0, 0, 0},
    {1, 1, 5, 5, 17, 0, 0, 0, 0},
    {1, 1, 5, 5, 5, 0, 0, 0, 0},
    {1, 1, 7, 11, 19, 0, 0, 0, 0},
    {1, 1, 5, 1, 1, 0, 0, 0, 0},
    {1, 1, 1, 3, 11, 0, 0, 0, 0},
    {1, 3, 5, 5, 31, 0, 0, 0, 0},
    {1, 3, 3, 9, 7, 49, 0, 0, 0},
    {1, 1, 1, 15, 21, 21, 0, 0, 0},
    {1, 3, 1, 13, 27, 49, 0, 0, 0},
    {1, 1, 1, 15, 7, 5, 0, 0, 0},
    {1, 3, 1, 15, 13, 25, 0, 0, 0},
    {1, 1, 5, 5, 19, 61, 0, 0, 0},
    {1, 3, 7, 11, 23, 15, 103, 0, 0},
    {1, 3, 7, 13, 13, 15, 69, 0, 0},
    {1, 1, 3, 13, 7, 35, 63, 0, 0},
    {1, 3, 5, 9, 1, 25, 53, 0, 0},
    {1, 3, 1, 13, 9, 35, 107, 0, 0},
    {1, 3, 1, 5, 27, 61, 31, 0, 0},
    {1, 1, 5, 11, 19, 41, 61, 0, 0},
    {1, 3, 5, 3, 3, 13, 69, 0, 0},
    {1, 1, 7, 13, 1, 19, 1, 0, 0},
    {1, 3, 7, 5, 13, 19, 59, 0, 0},
    {1, 1, 3, 9, 25, 29, 41, 0, 0},
    {1, 3, 5, 13, 23, 1, 55, 0, 0},
    {1, 3, 7, 3, 13, 59, 17, 0, 0},
    {1, 3, 1, 3, 5, 53, 69, 0, 0},
    {1, 1, 5, 5, 23, 33, 13, 0, 0},
    {1, 1, 7, 7, 1, 61, 123, 0, 0},
    {1, 1, 7, 9, 13, 61, 49, 0, 0},
    {1, 3, 3, 5, 3, 55, 33, 0, 0},
    {1, 3, 1, 15, 31, 13, 49, 245, 0},
    {1, 3, 5, 15, 31, 59, 63, 97, 0},
    {1, 3, 1, 11, 11, 11, 77, 249, 0},
    {1, 3, 1, 11, 27, 43, 71, 9, 0},
    {1, 1, 7, 15, 21, 11, 81, 45, 0},
    {1, 3, 7, 3, 25, 31, 65, 79, 0},
    {1, 3, 1, 1, 19, 11, 3, 205, 0},
    {1, 1, 5, 9, 19, 21, 29, 157, 0},
    {1, 3, 7, 11, 1, 33, 89, 185, 0},
    {1, 3, 3, 3, 15, 9, 79, 71, 0},
    {1, 3, 7, 11, 15, 39, 119, 27, 0},
    {1, 1, 3, 1, 11, 31, 97, 225, 0},
    {1, 1, 1, 3, 23, 43, 57, 177, 0},
    {1, 3, 7, 7, 17, 17, 37, 71, 0},
    {1, 3, 1, 5, 27, 63, 123, 213, 0},
    {1, 1, 3, 5, 11, 43, 53, 133, 0},
    {1, 3, 5, 5, 29, 17, 47, 173, 479},
    {1, 3, 3, 11, 3, 1, 109, 9, 69},
    {1, 1, 1, 5, 17, 39, 23, 5, 343},
    {1, 3, 1, 5, 25, 15, 31, 103, 499},
    {1, 1, 1, 11, 11, 17, 63, 105, 183},
    {1, 1, 5, 11, 9, 29, 97, 231, 363},
    {1, 1, 5, 15, 19, 45, 41, 7, 383},
    {1, 3, 7, 7, 31, 19, 83, 137, 221},
    {1, 1, 1, 3, 23, 15, 111, 223, 83},
    {1, 1, 5, 13, 31, 15, 55, 25, 161},
    {1, 1, 3, 13, 25, 47, 39, 87, 257}
};

}  // namespace parafit::detail
