#pragma once

#include "config.hpp"
#include "encoding_tree.hpp"
#include "entropy.hpp"
#include "errors.hpp"
#include "fixtures.hpp"
#include "graph.hpp"
#include "io.hpp"
#include "pipeline.hpp"
#include "reconstruction.hpp"
#include "rng.hpp"
#include "similarity.hpp"
#include "synthetic.hpp"
#include "tree_builder.hpp"
#include "tree_io.hpp"
