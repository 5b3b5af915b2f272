#include "aidi/error.hpp"
#include "aidi/kernels.hpp"

#include <cstdlib>
#include <string>

namespace aidi::kernels {

#ifndef AIDI_HAVE_AVX2_TU
const KernelTable* avx2_table() { return nullptr; }
#endif

bool isa_available(Isa isa) {
    switch (isa) {
        case Isa::Scalar:
            return true;
        case Isa::Avx2:
#if defined(AIDI_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
            return avx2_table() != nullptr && __builtin_cpu_supports("avx2");
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& table(Isa isa) {
    if (!isa_available(isa)) throw ConfigError("kernel variant not available on this CPU/build");
    if (isa == Isa::Avx2) return *avx2_table();
    return scalar_table();
}

namespace {

const KernelTable& select() {
    if (const char* env = std::getenv("AIDI_KERNELS")) {
        const std::string want(env);
        if (want == "scalar") return scalar_table();
        if (want == "avx2") return table(Isa::Avx2);
        throw ConfigError("AIDI_KERNELS must be 'scalar' or 'avx2', got '" + want + "'");
    }
    if (isa_available(Isa::Avx2)) return *avx2_table();
    return scalar_table();
}

}  // namespace

const KernelTable& active() {
    static const KernelTable& t = select();
    return t;
}

}  // namespace aidi::kernels
