#pragma once

// Umbrella header.

#include "afpnet/bench.hpp"
#include "afpnet/checkpoint.hpp"
#include "afpnet/common.hpp"
#include "afpnet/config.hpp"
#include "afpnet/eval.hpp"
#include "afpnet/explain.hpp"
#include "afpnet/fpm.hpp"
#include "afpnet/ingest.hpp"
#include "afpnet/lexer.hpp"
#include "afpnet/matrix.hpp"
#include "afpnet/model.hpp"
#include "afpnet/rpam.hpp"
#include "afpnet/train.hpp"
