#pragma once

#include <stdexcept>
#include <string>

namespace hvc {

// Base class for all recoverable pipeline errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class DegenerateQuad : public Error {
public:
    explicit DegenerateQuad(const std::string& msg) : Error(msg) {}
};

class PointAtInfinity : public Error {
public:
    explicit PointAtInfinity(const std::string& msg) : Error(msg) {}
};

class Singular : public Error {
public:
    explicit Singular(const std::string& msg) : Error(msg) {}
};

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

class WeightTopologyMismatch : public Error {
public:
    explicit WeightTopologyMismatch(const std::string& msg) : Error(msg) {}
};

class InsufficientSupport : public Error {
public:
    explicit InsufficientSupport(const std::string& msg) : Error(msg) {}
};

class QuadOutOfFrame : public Error {
public:
    explicit QuadOutOfFrame(const std::string& msg) : Error(msg) {}
};

class DegenerateDataset : public Error {
public:
    explicit DegenerateDataset(const std::string& msg) : Error(msg) {}
};

class LengthMismatch : public Error {
public:
    explicit LengthMismatch(const std::string& msg) : Error(msg) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, int line = -1)
        : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg), line_number(line) {}
    int line_number;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

} // namespace hvc
