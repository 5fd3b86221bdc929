#include <catch_amalgamated.hpp>
#include <nomadsim/nomadsim.hpp>
