#pragma once

#include <cmath>
#include <vector>

namespace mmx {
namespace detail {

inline double log_binomial(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// lexicographic k-combination enumeration over an index pool
class Combinations {
  public:
    Combinations(const std::vector<int>& pool, int k) : pool_(pool), k_(k) {
        idx_.resize(k);
        for (int i = 0; i < k; ++i) idx_[i] = i;
        done_ = k > static_cast<int>(pool.size());
    }

    bool done() const { return done_; }

    std::vector<int> current() const {
        std::vector<int> out(k_);
        for (int i = 0; i < k_; ++i) out[i] = pool_[idx_[i]];
        return out;
    }

    void next() {
        const int n = static_cast<int>(pool_.size());
        int i = k_ - 1;
        while (i >= 0 && idx_[i] == n - k_ + i) --i;
        if (i < 0) {
            done_ = true;
            return;
        }
        ++idx_[i];
        for (int t = i + 1; t < k_; ++t) idx_[t] = idx_[t - 1] + 1;
    }

  private:
    std::vector<int> pool_;
    int k_;
    std::vector<int> idx_;
    bool done_ = false;
};

} // namespace detail
} // namespace mmx
