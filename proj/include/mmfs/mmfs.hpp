#pragma once

#include "mmfs/data.hpp"
#include "mmfs/error.hpp"
#include "mmfs/eval.hpp"
#include "mmfs/io.hpp"
#include "mmfs/markov.hpp"
#include "mmfs/select.hpp"
#include "mmfs/solver.hpp"
