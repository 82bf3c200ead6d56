#pragma once

#include <cstdint>
#include <vector>

namespace acqlab {

// Profiles (action profiles over B = B_1 x ... x B_n, signal profiles over S)
// are flattened mixed-radix with agent 0 most significant:
//   index = d_0 * r^(n-1) + d_1 * r^(n-2) + ... + d_{n-1}.
// All agents share the same radix (k for actions, l for signals).

inline long profile_count(int n, int radix) {
    long c = 1;
    for (int i = 0; i < n; ++i) c *= radix;
    return c;
}

inline long profile_index(const std::vector<int>& digits, int radix) {
    long idx = 0;
    for (int d : digits) idx = idx * radix + d;
    return idx;
}

inline std::vector<int> profile_digits(long idx, int n, int radix) {
    std::vector<int> d(n);
    for (int i = n - 1; i >= 0; --i) {
        d[i] = static_cast<int>(idx % radix);
        idx /= radix;
    }
    return d;
}

// Stride of agent i's digit in the flattened index: radix^(n-1-i).
inline long digit_stride(int i, int n, int radix) {
    long s = 1;
    for (int j = i + 1; j < n; ++j) s *= radix;
    return s;
}

inline int digit_of(long idx, int i, int n, int radix) {
    return static_cast<int>((idx / digit_stride(i, n, radix)) % radix);
}

// Replace agent i's digit in a flattened profile index.
inline long with_digit(long idx, int i, int n, int radix, int digit) {
    long s = digit_stride(i, n, radix);
    int old = static_cast<int>((idx / s) % radix);
    return idx + (static_cast<long>(digit) - old) * s;
}

// Enumerates flattened indices of profiles over the agents != i, returning the
// full-profile index with agent i's digit fixed to `digit`. The j-th call
// (j = 0 .. radix^(n-1)-1) yields the j-th profile of the others in
// lexicographic order.
inline long compose_profile(int i, int n, int radix, int digit, long others_idx) {
    long idx = 0;
    long rem = others_idx;
    long others_count = profile_count(n - 1, radix);
    long div = others_count;
    for (int j = 0; j < n; ++j) {
        int dj;
        if (j == i) {
            dj = digit;
        } else {
            div /= radix;
            dj = static_cast<int>((rem / div) % radix);
        }
        idx = idx * radix + dj;
    }
    return idx;
}

}  // namespace acqlab
