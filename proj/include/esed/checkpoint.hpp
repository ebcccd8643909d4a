#pragma once

#include <iosfwd>
#include <string>

#include "esed/corpus.hpp"
#include "esed/smc.hpp"

namespace esed {

// A self-describing snapshot of a trained filter together with the
// vocabulary and region set it was trained against. The JSON encoding
// round-trips byte-identically: save(load(x)) == x.
struct Checkpoint {
    FilterState state;
    Vocabulary vocab;
    RegionSet regions;
};

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace esed
