#pragma once

#include <advbal/classifiers/cross_validation.hpp>
#include <advbal/classifiers/family.hpp>
#include <advbal/classifiers/gradient_check.hpp>
#include <advbal/classifiers/model.hpp>
