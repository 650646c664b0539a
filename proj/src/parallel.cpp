#include "distkern/parallel.hpp"

#include <cstdlib>
#include <string>

namespace distkern {

unsigned resolve_jobs(int flag) {
    if (flag > 0) return static_cast<unsigned>(flag);
    if (const char* env = std::getenv("DISTKERN_JOBS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
            // ignore malformed values
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace distkern
