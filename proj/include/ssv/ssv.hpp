#pragma once

#include "ssv/linalg.hpp"
#include "ssv/graph.hpp"
#include "ssv/tensor_hs.hpp"
#include "ssv/lmi.hpp"
#include "ssv/mu.hpp"
#include "ssv/tv.hpp"
#include "ssv/bft.hpp"
#include "ssv/brl.hpp"
#include "ssv/io.hpp"
