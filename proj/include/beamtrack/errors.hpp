// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace beamtrack
{
    struct Error : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    struct InvalidInput : Error
    {
        using Error::Error;
    };

    struct ShapeError : Error
    {
        using Error::Error;
    };

    struct EmptyChannel : Error
    {
        using Error::Error;
    };

    struct DegenerateInput : Error
    {
        using Error::Error;
    };

    struct ValidationError : Error
    {
        using Error::Error;
    };

    struct NumericError : Error
    {
        using Error::Error;
    };

    struct InvalidState : Error
    {
        using Error::Error;
    };

    // Malformed input file; line is 1-based, 0 when not tied to a line
    struct ParseError : Error
    {
        ParseError(std::size_t line, const std::string &what)
            : Error("line " + std::to_string(line) + ": " + what), line(line) {}
        std::size_t line;
    };

    // Pipeline failure tagged with the stage that raised it
    struct StageError : Error
    {
        StageError(std::string stage, const std::string &what)
            : Error(stage + ": " + what), stage(std::move(stage)) {}
        std::string stage;
    };
}
