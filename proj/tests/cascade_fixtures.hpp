#pragma once

// Hand-built intersection states for the rule cascade. Expected phases were
// derived by hand from the layer definitions; the brute-force oracle in
// oracles.hpp must agree with them.

#include <string>
#include <vector>

#include "oracles.hpp"

namespace citylight::testing {

struct CascadeFixture {
  std::string name;
  oracle::CascadeInput input;
  int phase;
  int layer;
  int round;
};

inline oracle::CascadeInput quiet_intersection() {
  oracle::CascadeInput in;
  in.exists.fill(true);
  in.alpha_rel.fill(0.0);
  in.blocked.fill(0);
  in.speed.fill(5.0);
  return in;
}

inline std::vector<CascadeFixture> cascade_fixtures() {
  std::vector<CascadeFixture> out;
  auto add = [&](std::string name, oracle::CascadeInput in, int phase, int layer, int round) {
    out.push_back({std::move(name), in, phase, layer, round});
  };

  add("empty intersection falls through to the densest lane", quiet_intersection(), 1, 4, 1);

  {
    auto in = quiet_intersection();
    in.blocked[2] = 999;  // right turns never count as blocked
    add("blocked right-turn lane is ignored", in, 1, 4, 1);
  }
  {
    auto in = quiet_intersection();
    in.alpha_rel[10] = 0.5;
    in.alpha_rel[7] = 0.4;
    in.alpha_rel[1] = 0.3;
    in.blocked[1] = 250;
    add("layer 1 round 1 prefers the two-road phase", in, 2, 1, 1);
  }
  {
    auto in = quiet_intersection();
    in.alpha_rel[4] = 0.5;
    in.alpha_rel[3] = 0.4;
    in.blocked[3] = 260;
    add("layer 1 round 1 takes the one-road phase when the partner ranks low", in, 6, 1, 1);
  }
  {
    auto in = quiet_intersection();
    in.alpha_rel[0] = -0.5;
    in.alpha_rel[1] = 0.5;
    in.alpha_rel[7] = 0.4;
    in.blocked[0] = 400;
    in.blocked[7] = 300;
    add("layer 1 round 2 serves the second blocked lane", in, 2, 1, 2);
  }
  {
    auto in = quiet_intersection();
    in.alpha_rel[4] = 0.10;
    in.alpha_rel[10] = 0.09;
    in.blocked[0] = 250;
    in.c_block = 300;
    add("blocked below the later threshold, balanced pair wins", in, 4, 2, 1);
  }
  {
    auto in = quiet_intersection();
    in.alpha_rel[4] = 0.10;
    in.alpha_rel[10] = 0.09;
    in.blocked[0] = 250;
    add("layer 1 overrides a balanced pair", in, 5, 1, 1);
  }
  {
    auto in = quiet_intersection();
    in.alpha_rel[4] = 0.10;
    in.alpha_rel[1] = 0.05;
    in.alpha_rel[3] = 0.04;
    add("layer 2 advances to round 2", in, 6, 2, 2);
  }
  {
    auto in = quiet_intersection();
    in.alpha_rel[4] = 0.10;
    in.alpha_rel[0] = 0.06;
    in.alpha_rel[1] = 0.05;
    in.alpha_rel[3] = 0.04;
    add("layer 2 advances to round 3", in, 6, 2, 3);
  }
  {
    auto in = quiet_intersection();
    in.alpha_rel[4] = 0.10;
    in.alpha_rel[0] = 0.07;
    in.alpha_rel[1] = 0.06;
    in.alpha_rel[6] = 0.05;
    in.alpha_rel[3] = 0.04;
    add("layer 2 advances to round 4", in, 6, 2, 4);
  }
  {
    auto in = quiet_intersection();
    in.alpha_rel[0] = 0.5;
    in.alpha_rel[4] = 0.3;
    in.alpha_rel[10] = 0.28;
    add("layer 2 round 5 picks a pair away from the anchor", in, 4, 2, 5);
  }
  {
    auto in = quiet_intersection();
    in.alpha_rel[4] = 0.10;
    in.alpha_rel[10] = 0.01;
    add("unbalanced pair is not accepted", in, 4, 4, 1);
  }
  {
    auto in = quiet_intersection();
    in.alpha_rel[0] = 0.9;
    in.alpha_rel[3] = 0.3;
    in.alpha_rel[7] = 0.2;
    in.alpha_rel[1] = 0.15;
    in.speed[1] = 0.0;
    in.speed[7] = 0.5;
    add("layer 3 round 1 serves two stopped lanes", in, 2, 3, 1);
  }
  {
    auto in = quiet_intersection();
    in.alpha_rel[0] = 2.0;
    in.alpha_rel[3] = 0.3;
    in.alpha_rel[5] = 0.25;
    in.alpha_rel[1] = 0.2;
    in.alpha_rel[7] = 0.15;
    in.speed[5] = 0.0;
    in.speed[1] = 0.2;
    in.speed[7] = 0.4;
    add("layer 3 relaxes in round 2", in, 2, 3, 2);
  }
  {
    auto in = quiet_intersection();
    in.alpha_rel[2] = 0.5;
    in.alpha_rel[4] = 0.1;
    add("densest lane is a right turn, fall to the next", in, 4, 4, 2);
  }
  {
    auto in = quiet_intersection();
    in.alpha_rel[1] = 0.3;
    add("layer 4 prefers the two-road phase", in, 2, 4, 1);
  }
  {
    auto in = quiet_intersection();
    for (int s : {9, 10, 11}) in.exists[s] = false;
    in.alpha_rel[3] = 0.4;
    add("three-leg intersection returns the one-road phase", in, 6, 4, 1);
  }
  return out;
}

}  // namespace citylight::testing
