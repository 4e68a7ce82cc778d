#pragma once

#include "dfml/numerics.hpp"
#include "dfml/mesh.hpp"
#include "dfml/discretization.hpp"
#include "dfml/problem.hpp"
#include "dfml/energy.hpp"
#include "dfml/multilevel.hpp"
#include "dfml/report.hpp"
#include "dfml/reference.hpp"
#include "dfml/psc.hpp"
#include "dfml/alm.hpp"
#include "dfml/abstract_alm.hpp"
#include "dfml/bench.hpp"
#include "dfml/verify.hpp"
