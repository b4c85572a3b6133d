#include "steam/flops.hpp"

namespace steam::flops {

namespace {
thread_local Counter* g_active = nullptr;
}

Counter::Counter() : prev_(g_active) { g_active = this; }
Counter::~Counter() { g_active = prev_; }

void add(std::uint64_t n) {
    if (g_active) g_active->total_ += n;
}

std::string conventions_text() {
    return
        "FLOP conventions: 1 MAC = 2 FLOPs; elementwise add/mul = 1 FLOP/element;\n"
        "relu = 1, sigmoid/tanh = 4 FLOPs/element; softmax = 5 FLOPs/entry;\n"
        "pooling and reductions = 1 FLOP per output element; attention head\n"
        "averaging = H FLOPs per neighbor entry; upsample/reshape = 0 FLOPs.\n";
}

}  // namespace steam::flops
