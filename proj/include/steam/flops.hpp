#pragma once

#include <cstdint>
#include <string>

namespace steam::flops {

// FLOP accounting conventions. FLOP counts are only comparable under a
// fixed set of rules, so the library pins its own and prints them in every
// report. The same rules drive both the analytic model and the runtime
// instrumentation, so the two agree exactly.
//
//   * 1 multiply-accumulate (MAC) = 2 FLOPs
//   * elementwise add/mul/sub     = 1 FLOP per output element
//   * relu                        = 1 FLOP per element
//   * sigmoid / tanh / exp-family = 4 FLOPs per element
//   * softmax                     = 5 FLOPs per participating entry
//   * pooling / reductions        = 1 FLOP per OUTPUT element
//   * attention head averaging    = H FLOPs per neighbor entry
//   * upsample / reshape / concat = 0 FLOPs (data movement)
inline constexpr int kFlopsPerMac = 2;
inline constexpr int kFlopsPerSoftmaxEntry = 5;
inline constexpr int kFlopsPerTranscendental = 4;

std::string conventions_text();

// Thread-local counter enabled via RAII. Ops report their forward cost
// here when a counter is active; backward passes are not counted.
class Counter {
public:
    Counter();
    ~Counter();
    Counter(const Counter&) = delete;
    Counter& operator=(const Counter&) = delete;

    std::uint64_t total() const { return total_; }

private:
    friend void add(std::uint64_t);
    std::uint64_t total_ = 0;
    Counter* prev_;
};

void add(std::uint64_t n);

}  // namespace steam::flops
