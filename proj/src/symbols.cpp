#include "btq/symbols.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "btq/errors.hpp"

namespace btq {
namespace detail {

enum class Kind { kConst, kZ, kConjZ, kAdd, kMul, kNeg, kPow, kExp, kInv, kBump, kProfile };

struct Node {
    Kind kind;
    Complex value{};                 // kConst
    NodePtr a, b;                    // children
    int ipow = 0;                    // kPow
    Complex center{};                // kBump
    double radius = 0.0;             // kBump
    int order = 0;                   // kBump: profile derivative order
    int order_cap = 8;               // kBump
    std::shared_ptr<const RealProfile> profile; // kProfile
};

namespace {

NodePtr make(Node n) { return std::make_shared<const Node>(std::move(n)); }

NodePtr make_const(Complex c) {
    Node n;
    n.kind = Kind::kConst;
    n.value = c;
    return make(n);
}

bool is_const(const NodePtr& n, Complex c) {
    return n->kind == Kind::kConst && n->value == c;
}

NodePtr make_add(NodePtr a, NodePtr b) {
    if (a->kind == Kind::kConst && b->kind == Kind::kConst)
        return make_const(a->value + b->value);
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
    Node n;
    n.kind = Kind::kAdd;
    n.a = std::move(a);
    n.b = std::move(b);
    return make(n);
}

NodePtr make_neg(NodePtr a) {
    if (a->kind == Kind::kConst) return make_const(-a->value);
    if (a->kind == Kind::kNeg) return a->a;
    Node n;
    n.kind = Kind::kNeg;
    n.a = std::move(a);
    return make(n);
}

NodePtr make_mul(NodePtr a, NodePtr b) {
    if (a->kind == Kind::kConst && b->kind == Kind::kConst)
        return make_const(a->value * b->value);
    if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    Node n;
    n.kind = Kind::kMul;
    n.a = std::move(a);
    n.b = std::move(b);
    return make(n);
}

NodePtr make_pow(NodePtr a, int p) {
    if (p < 0) throw Error("pow: exponent must be nonnegative");
    if (p == 0) return make_const(1.0);
    if (p == 1) return a;
    if (a->kind == Kind::kConst) return make_const(std::pow(a->value, p));
    Node n;
    n.kind = Kind::kPow;
    n.a = std::move(a);
    n.ipow = p;
    return make(n);
}

NodePtr make_exp(NodePtr a) {
    if (a->kind == Kind::kConst) return make_const(std::exp(a->value));
    Node n;
    n.kind = Kind::kExp;
    n.a = std::move(a);
    return make(n);
}

NodePtr make_inv(NodePtr a) {
    if (a->kind == Kind::kConst && a->value != Complex(0.0))
        return make_const(1.0 / a->value);
    Node n;
    n.kind = Kind::kInv;
    n.a = std::move(a);
    return make(n);
}

// ---- bump profile ----------------------------------------------------------
//
// P(s) = exp(1 - 1/(1-s)) on [0,1), 0 beyond. With v = 1/(1-s),
// P^(k)(s) = Q_k(v) P(s) where Q_0 = 1 and Q_{k+1} = v^2 (Q_k' - Q_k).

constexpr int kProfileOrderMax = 16;

const std::vector<std::vector<double>>& profile_polys() {
    static const std::vector<std::vector<double>> polys = [] {
        std::vector<std::vector<double>> q;
        q.push_back({1.0});
        for (int k = 0; k < kProfileOrderMax; ++k) {
            const auto& cur = q.back();
            std::vector<double> next(cur.size() + 2, 0.0);
            for (std::size_t j = 0; j < cur.size(); ++j) {
                next[j + 1] += static_cast<double>(j) * cur[j];
                next[j + 2] -= cur[j];
            }
            q.push_back(std::move(next));
        }
        return q;
    }();
    return polys;
}

double profile_value(int k, double s) {
    if (s >= 1.0 - 1e-14) return 0.0;
    const double v = 1.0 / (1.0 - s);
    if (v > 600.0) return 0.0; // value below 1e-200, negligible
    const auto& q = profile_polys().at(static_cast<std::size_t>(k));
    double acc = 0.0;
    for (auto it = q.rbegin(); it != q.rend(); ++it) acc = acc * v + *it;
    return acc * std::exp(1.0 - v);
}

double bump_s(const Node& n, Complex z) {
    return std::norm(z - n.center) / (n.radius * n.radius);
}

// ---- evaluation ------------------------------------------------------------

Complex eval_node(const Node& n, Complex z) {
    switch (n.kind) {
        case Kind::kConst: return n.value;
        case Kind::kZ: return z;
        case Kind::kConjZ: return std::conj(z);
        case Kind::kAdd: return eval_node(*n.a, z) + eval_node(*n.b, z);
        case Kind::kMul: return eval_node(*n.a, z) * eval_node(*n.b, z);
        case Kind::kNeg: return -eval_node(*n.a, z);
        case Kind::kPow: {
            const Complex base = eval_node(*n.a, z);
            Complex acc(1.0);
            for (int i = 0; i < n.ipow; ++i) acc *= base;
            return acc;
        }
        case Kind::kExp: return std::exp(eval_node(*n.a, z));
        case Kind::kInv: return 1.0 / eval_node(*n.a, z);
        case Kind::kBump: return profile_value(n.order, bump_s(n, z));
        case Kind::kProfile:
            return n.profile->value(eval_node(*n.a, z).real());
    }
    return {};
}

Complex eval_polarized_node(const Node& n, Complex x, Complex yc) {
    switch (n.kind) {
        case Kind::kConst: return n.value;
        case Kind::kZ: return x;
        case Kind::kConjZ: return yc;
        case Kind::kAdd:
            return eval_polarized_node(*n.a, x, yc) + eval_polarized_node(*n.b, x, yc);
        case Kind::kMul:
            return eval_polarized_node(*n.a, x, yc) * eval_polarized_node(*n.b, x, yc);
        case Kind::kNeg: return -eval_polarized_node(*n.a, x, yc);
        case Kind::kPow: {
            const Complex base = eval_polarized_node(*n.a, x, yc);
            Complex acc(1.0);
            for (int i = 0; i < n.ipow; ++i) acc *= base;
            return acc;
        }
        case Kind::kExp: return std::exp(eval_polarized_node(*n.a, x, yc));
        case Kind::kInv: return 1.0 / eval_polarized_node(*n.a, x, yc);
        case Kind::kBump: {
            const Complex mid = 0.5 * (x + std::conj(yc));
            return profile_value(n.order, bump_s(n, mid));
        }
        case Kind::kProfile: {
            const Complex mid = 0.5 * (x + std::conj(yc));
            return n.profile->value(eval_node(*n.a, mid).real());
        }
    }
    return {};
}

// ---- derivatives -----------------------------------------------------------

NodePtr diff_node(const NodePtr& n, bool bar);

NodePtr bump_chain_factor(const Node& n, bool bar) {
    // d/dz s = (conj z - conj c)/r^2, d/dzbar s = (z - c)/r^2
    Node var;
    var.kind = bar ? Kind::kZ : Kind::kConjZ;
    const Complex shift = bar ? n.center : std::conj(n.center);
    return make_mul(make_const(1.0 / (n.radius * n.radius)),
                    make_add(make(var), make_const(-shift)));
}

NodePtr diff_node(const NodePtr& n, bool bar) {
    switch (n->kind) {
        case Kind::kConst: return make_const(0.0);
        case Kind::kZ: return make_const(bar ? 0.0 : 1.0);
        case Kind::kConjZ: return make_const(bar ? 1.0 : 0.0);
        case Kind::kAdd: return make_add(diff_node(n->a, bar), diff_node(n->b, bar));
        case Kind::kNeg: return make_neg(diff_node(n->a, bar));
        case Kind::kMul:
            return make_add(make_mul(diff_node(n->a, bar), n->b),
                            make_mul(n->a, diff_node(n->b, bar)));
        case Kind::kPow:
            return make_mul(make_const(static_cast<double>(n->ipow)),
                            make_mul(make_pow(n->a, n->ipow - 1), diff_node(n->a, bar)));
        case Kind::kExp: return make_mul(n, diff_node(n->a, bar));
        case Kind::kInv:
            return make_neg(make_mul(diff_node(n->a, bar), make_pow(make_inv(n->a), 2)));
        case Kind::kBump: {
            if (n->order + 1 > n->order_cap)
                throw DerivativeOrderError(
                    "bump profile derivatives materialized only to order " +
                    std::to_string(n->order_cap));
            Node up = *n;
            up.order += 1;
            return make_mul(make(up), bump_chain_factor(*n, bar));
        }
        case Kind::kProfile: {
            Node up = *n;
            up.profile = n->profile->derivative();
            return make_mul(make(up), diff_node(n->a, bar));
        }
    }
    return {};
}

// ---- structure -------------------------------------------------------------

bool nodes_equal(const NodePtr& x, const NodePtr& y) {
    if (x == y) return true;
    if (x->kind != y->kind) return false;
    switch (x->kind) {
        case Kind::kConst: return x->value == y->value;
        case Kind::kZ:
        case Kind::kConjZ: return true;
        case Kind::kNeg:
        case Kind::kExp:
        case Kind::kInv: return nodes_equal(x->a, y->a);
        case Kind::kPow: return x->ipow == y->ipow && nodes_equal(x->a, y->a);
        case Kind::kAdd:
        case Kind::kMul:
            if (nodes_equal(x->a, y->a) && nodes_equal(x->b, y->b)) return true;
            return nodes_equal(x->a, y->b) && nodes_equal(x->b, y->a);
        case Kind::kBump:
            return x->center == y->center && x->radius == y->radius &&
                   x->order == y->order;
        case Kind::kProfile:
            return x->profile->label() == y->profile->label() &&
                   nodes_equal(x->a, y->a);
    }
    return false;
}

NodePtr conj_transform(const NodePtr& n) {
    switch (n->kind) {
        case Kind::kConst: return make_const(std::conj(n->value));
        case Kind::kZ: {
            Node m;
            m.kind = Kind::kConjZ;
            return make(m);
        }
        case Kind::kConjZ: {
            Node m;
            m.kind = Kind::kZ;
            return make(m);
        }
        case Kind::kAdd: return make_add(conj_transform(n->a), conj_transform(n->b));
        case Kind::kMul: return make_mul(conj_transform(n->a), conj_transform(n->b));
        case Kind::kNeg: return make_neg(conj_transform(n->a));
        case Kind::kPow: return make_pow(conj_transform(n->a), n->ipow);
        case Kind::kExp: return make_exp(conj_transform(n->a));
        case Kind::kInv: return make_inv(conj_transform(n->a));
        case Kind::kBump: return n; // real radial factor
        case Kind::kProfile: return n; // symmetric only if the profile is real
    }
    return n;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

double support_radius_node(const NodePtr& n) {
    switch (n->kind) {
        case Kind::kConst: return n->value == Complex(0.0) ? 0.0 : kInf;
        case Kind::kZ:
        case Kind::kConjZ:
        case Kind::kExp:
        case Kind::kInv:
        case Kind::kProfile: return kInf;
        case Kind::kAdd:
            return std::max(support_radius_node(n->a), support_radius_node(n->b));
        case Kind::kMul:
            return std::min(support_radius_node(n->a), support_radius_node(n->b));
        case Kind::kNeg: return support_radius_node(n->a);
        case Kind::kPow: return support_radius_node(n->a);
        case Kind::kBump: return std::abs(n->center) + n->radius;
    }
    return kInf;
}

int angular_degree_node(const NodePtr& n) {
    switch (n->kind) {
        case Kind::kConst: return 0;
        case Kind::kZ:
        case Kind::kConjZ: return 1;
        case Kind::kAdd: {
            const int da = angular_degree_node(n->a), db = angular_degree_node(n->b);
            return (da < 0 || db < 0) ? -1 : std::max(da, db);
        }
        case Kind::kMul: {
            const int da = angular_degree_node(n->a), db = angular_degree_node(n->b);
            return (da < 0 || db < 0) ? -1 : da + db;
        }
        case Kind::kNeg: return angular_degree_node(n->a);
        case Kind::kPow: {
            const int da = angular_degree_node(n->a);
            return da < 0 ? -1 : da * n->ipow;
        }
        case Kind::kExp:
        case Kind::kInv:
        case Kind::kProfile: {
            const int da = angular_degree_node(n->a);
            return da == 0 ? 0 : -1;
        }
        case Kind::kBump:
            return n->center == Complex(0.0) ? 0 : -1;
    }
    return -1;
}

// ---- printing --------------------------------------------------------------

std::string fmt_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

std::string fmt_const(Complex c) {
    if (c.imag() == 0.0) return fmt_double(c.real());
    return "complex(" + fmt_double(c.real()) + "," + fmt_double(c.imag()) + ")";
}

int precedence(Kind k) {
    switch (k) {
        case Kind::kAdd: return 1;
        case Kind::kNeg: return 2;
        case Kind::kMul: return 3;
        case Kind::kPow: return 4;
        default: return 5;
    }
}

void print_node(const NodePtr& n, std::string& out, int parent_prec) {
    const int prec = precedence(n->kind);
    const bool paren = prec < parent_prec;
    if (paren) out += '(';
    switch (n->kind) {
        case Kind::kConst: {
            const std::string s = fmt_const(n->value);
            // a leading minus at multiplicative context needs parens
            if (!paren && s[0] == '-' && parent_prec > 1) {
                out += '(';
                out += s;
                out += ')';
            } else {
                out += s;
            }
            break;
        }
        case Kind::kZ: out += 'z'; break;
        case Kind::kConjZ: out += "conj(z)"; break;
        case Kind::kAdd:
            // right operand printed one level tighter to keep the tree shape
            print_node(n->a, out, 1);
            out += '+';
            print_node(n->b, out, 2);
            break;
        case Kind::kMul:
            print_node(n->a, out, 3);
            out += '*';
            print_node(n->b, out, 4);
            break;
        case Kind::kNeg:
            // unary minus binds at factor level; parenthesize products below it
            out += '-';
            print_node(n->a, out, 4);
            break;
        case Kind::kPow:
            print_node(n->a, out, 5);
            out += '^';
            out += std::to_string(n->ipow);
            break;
        case Kind::kExp:
            out += "exp(";
            print_node(n->a, out, 0);
            out += ')';
            break;
        case Kind::kInv:
            out += "inv(";
            print_node(n->a, out, 0);
            out += ')';
            break;
        case Kind::kBump:
            if (n->order == 0) {
                out += "bump(" + fmt_const(n->center) + "," + fmt_double(n->radius) + ")";
            } else {
                out += "bump_d" + std::to_string(n->order) + "(" + fmt_const(n->center) +
                       "," + fmt_double(n->radius) + ")";
            }
            break;
        case Kind::kProfile:
            out += n->profile->label() + "(";
            print_node(n->a, out, 0);
            out += ')';
            break;
    }
    if (paren) out += ')';
}

} // namespace
} // namespace detail

using detail::Kind;
using detail::Node;
using detail::NodePtr;

SymbolExpr SymbolExpr::constant(Complex c) { return SymbolExpr(detail::make_const(c)); }

SymbolExpr SymbolExpr::z() {
    Node n;
    n.kind = Kind::kZ;
    return SymbolExpr(detail::make(n));
}

SymbolExpr SymbolExpr::conj_z() {
    Node n;
    n.kind = Kind::kConjZ;
    return SymbolExpr(detail::make(n));
}

SymbolExpr SymbolExpr::bump(Complex center, double radius, int derivative_cap) {
    if (!(radius > 0.0)) throw Error("bump: radius must be positive");
    if (derivative_cap < 0 || derivative_cap > detail::kProfileOrderMax)
        throw Error("bump: derivative cap out of range");
    Node n;
    n.kind = Kind::kBump;
    n.center = center;
    n.radius = radius;
    n.order = 0;
    n.order_cap = derivative_cap;
    return SymbolExpr(detail::make(n));
}

SymbolExpr SymbolExpr::exp_of(const SymbolExpr& a) { return SymbolExpr(detail::make_exp(a.node_)); }
SymbolExpr SymbolExpr::inv_of(const SymbolExpr& a) { return SymbolExpr(detail::make_inv(a.node_)); }
SymbolExpr SymbolExpr::pow_of(const SymbolExpr& a, int n) {
    return SymbolExpr(detail::make_pow(a.node_, n));
}

SymbolExpr SymbolExpr::compose1d(std::shared_ptr<const RealProfile> profile,
                                 const SymbolExpr& inner) {
    Node n;
    n.kind = Kind::kProfile;
    n.profile = std::move(profile);
    n.a = inner.node_;
    return SymbolExpr(detail::make(n));
}

SymbolExpr operator+(const SymbolExpr& a, const SymbolExpr& b) {
    return SymbolExpr(detail::make_add(a.node_, b.node_));
}
SymbolExpr operator-(const SymbolExpr& a, const SymbolExpr& b) {
    return SymbolExpr(detail::make_add(a.node_, detail::make_neg(b.node_)));
}
SymbolExpr operator*(const SymbolExpr& a, const SymbolExpr& b) {
    return SymbolExpr(detail::make_mul(a.node_, b.node_));
}
SymbolExpr operator-(const SymbolExpr& a) { return SymbolExpr(detail::make_neg(a.node_)); }

Complex SymbolExpr::eval(Complex z) const { return detail::eval_node(*node_, z); }

Complex SymbolExpr::eval_polarized(Complex x, Complex y_conj) const {
    return detail::eval_polarized_node(*node_, x, y_conj);
}

SymbolExpr SymbolExpr::d_z() const { return SymbolExpr(detail::diff_node(node_, false)); }
SymbolExpr SymbolExpr::d_zbar() const { return SymbolExpr(detail::diff_node(node_, true)); }

std::string SymbolExpr::print() const {
    std::string out;
    detail::print_node(node_, out, 0);
    return out;
}

bool SymbolExpr::structurally_equal(const SymbolExpr& other) const {
    return detail::nodes_equal(node_, other.node_);
}

bool SymbolExpr::is_conjugation_symmetric() const {
    return detail::nodes_equal(node_, detail::conj_transform(node_));
}

double SymbolExpr::support_radius() const { return detail::support_radius_node(node_); }

int SymbolExpr::max_angular_degree() const { return detail::angular_degree_node(node_); }

SymbolExpr differentiate(const SymbolExpr& expr, int a, int b) {
    if (a < 0 || b < 0) throw Error("differentiate: negative order");
    SymbolExpr cur = expr;
    for (int i = 0; i < a; ++i) cur = cur.d_z();
    for (int i = 0; i < b; ++i) cur = cur.d_zbar();
    return cur;
}

namespace {
NodePtr dilate_node(const NodePtr& n, double factor) {
    using detail::make;
    switch (n->kind) {
        case Kind::kConst:
        case Kind::kZ:
        case Kind::kConjZ:
            return n;
        case Kind::kBump: {
            Node m = *n;
            m.radius = n->radius * factor;
            return make(m);
        }
        default: {
            Node m = *n;
            if (n->a) m.a = dilate_node(n->a, factor);
            if (n->b) m.b = dilate_node(n->b, factor);
            return make(m);
        }
    }
}
} // namespace

SymbolExpr dilate_bump_radii(const SymbolExpr& expr, double factor) {
    if (!(factor > 0.0)) throw Error("dilate_bump_radii: factor must be positive");
    return SymbolExpr(dilate_node(expr.node(), factor));
}

// ---- parser ----------------------------------------------------------------

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    SymbolExpr run() {
        SymbolExpr e = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return e;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& what) {
        throw ParseError(what + " at offset " + std::to_string(pos_), pos_);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    bool peek(char c) {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == c;
    }

    bool accept(char c) {
        if (peek(c)) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    SymbolExpr parse_expr() {
        SymbolExpr acc = parse_term();
        for (;;) {
            if (accept('+')) {
                acc = acc + parse_term();
            } else if (accept('-')) {
                acc = acc - parse_term();
            } else {
                return acc;
            }
        }
    }

    SymbolExpr parse_term() {
        SymbolExpr acc = parse_factor();
        while (accept('*')) acc = acc * parse_factor();
        return acc;
    }

    SymbolExpr parse_factor() {
        if (accept('-')) return -parse_factor();
        SymbolExpr atom = parse_atom();
        if (accept('^')) {
            skip_ws();
            const std::size_t start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
            if (pos_ == start) fail("expected nonnegative integer exponent");
            int p = 0;
            std::from_chars(text_.data() + start, text_.data() + pos_, p);
            return SymbolExpr::pow_of(atom, p);
        }
        return atom;
    }

    double parse_number_literal() {
        skip_ws();
        const std::size_t start = pos_;
        bool neg = false;
        if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) {
            neg = text_[pos_] == '-';
            ++pos_;
        }
        std::size_t digits = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
            ++pos_;
        if (pos_ == digits) fail("expected number");
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
        }
        double v = 0.0;
        const std::string chunk(text_.substr(start + (neg ? 1 : 0), pos_ - start - (neg ? 1 : 0)));
        try {
            v = std::stod(chunk);
        } catch (const std::exception&) {
            pos_ = start;
            fail("malformed number");
        }
        return neg ? -v : v;
    }

    std::string parse_ident() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }

    SymbolExpr parse_atom() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return SymbolExpr::constant(parse_number_literal());
        }
        if (c == '(') {
            ++pos_;
            SymbolExpr e = parse_expr();
            expect(')');
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t ident_pos = pos_;
            const std::string name = parse_ident();
            if (name == "z") return SymbolExpr::z();
            if (name == "conj") {
                expect('(');
                skip_ws();
                if (parse_ident() != "z") {
                    pos_ = ident_pos;
                    fail("conj argument must be z");
                }
                expect(')');
                return SymbolExpr::conj_z();
            }
            if (name == "exp") {
                expect('(');
                SymbolExpr e = parse_expr();
                expect(')');
                return SymbolExpr::exp_of(e);
            }
            if (name == "inv") {
                expect('(');
                SymbolExpr e = parse_expr();
                expect(')');
                return SymbolExpr::inv_of(e);
            }
            if (name == "complex") {
                expect('(');
                const double re = parse_number_literal();
                expect(',');
                const double im = parse_number_literal();
                expect(')');
                return SymbolExpr::constant(Complex(re, im));
            }
            if (name == "bump" || name.rfind("bump_d", 0) == 0) {
                int order = 0;
                if (name != "bump") {
                    try {
                        order = std::stoi(name.substr(6));
                    } catch (const std::exception&) {
                        pos_ = ident_pos;
                        fail("unknown identifier '" + name + "'");
                    }
                }
                expect('(');
                skip_ws();
                Complex center;
                if (text_.compare(pos_, 8, "complex(") == 0) {
                    pos_ += 8;
                    const double re = parse_number_literal();
                    expect(',');
                    const double im = parse_number_literal();
                    expect(')');
                    center = Complex(re, im);
                } else {
                    center = Complex(parse_number_literal(), 0.0);
                }
                expect(',');
                const double radius = parse_number_literal();
                expect(')');
                if (!(radius > 0.0)) fail("bump radius must be positive");
                SymbolExpr b = SymbolExpr::bump(center, radius);
                if (order > 0) {
                    Node n = *b.node();
                    n.order = order;
                    b = SymbolExpr(detail::make(n));
                }
                return b;
            }
            pos_ = ident_pos;
            fail("unknown identifier '" + name + "'");
        }
        fail("unexpected character");
    }
};

} // namespace

SymbolExpr parse_symbol(std::string_view text) { return Parser(text).run(); }

// ---- order functions and class checks --------------------------------------

OrderFunction OrderFunction::constant_one() {
    OrderFunction m;
    m.delta = 0.0;
    m.value = [](Complex, double) { return 1.0; };
    m.description = "1";
    return m;
}

OrderFunction OrderFunction::scaled_plus_one(const SymbolExpr& base, double delta) {
    if (delta < 0.0 || delta >= 0.5)
        throw Error("order function: delta must lie in [0, 1/2)");
    OrderFunction m;
    m.delta = delta;
    m.value = [base, delta](Complex zpt, double N) {
        return std::pow(N, 2.0 * delta) * base.eval(zpt).real() + 1.0;
    };
    m.description = "N^(2*" + std::to_string(delta) + ")*(" + base.print() + ")+1";
    return m;
}

std::pair<Symbol, OrderFunction> scale_symbol(const SymbolExpr& g, double delta) {
    if (delta < 0.0 || delta >= 0.5)
        throw Error("scale_symbol: delta must lie in [0, 1/2)");
    // the order-function construction needs a nonnegative real seed
    if (!g.is_conjugation_symmetric())
        throw Error("scale_symbol: seed must be real-valued");
    for (int i = -12; i <= 12; ++i) {
        for (int j = -12; j <= 12; ++j) {
            const Complex v = g.eval(Complex(0.25 * i, 0.25 * j));
            if (v.real() < -1e-12)
                throw Error("scale_symbol: seed is negative on the sample grid");
        }
    }
    Symbol f;
    f.expr = g;
    f.delta = delta;
    f.power = delta;
    return {f, OrderFunction::scaled_plus_one(g, delta)};
}

std::vector<Complex> make_chart_grid(const ModelGeometry& geometry, double half_width, int n) {
    std::vector<Complex> grid;
    grid.reserve(static_cast<std::size_t>(n) * n);
    const double bound = geometry.chart_bound() * 0.98;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double x = -half_width + 2.0 * half_width * i / (n - 1);
            const double y = -half_width + 2.0 * half_width * j / (n - 1);
            const Complex zpt(x, y);
            if (std::abs(zpt) <= bound) grid.push_back(zpt);
        }
    }
    return grid;
}

OrderFunctionCertificate check_order_function(
    const OrderFunction& m, const ModelGeometry& geometry,
    std::span<const double> N_list,
    std::span<const std::pair<Complex, Complex>> sample_pairs,
    int M0_max) {
    if (N_list.size() < 2) throw ConfigError("check_order_function: need at least 2 N values");
    OrderFunctionCertificate cert;
    const double delta = m.delta;
    for (int M0 = 0; M0 <= M0_max; ++M0) {
        std::vector<double> C_per_N;
        Complex worst_x, worst_y;
        double worst_ratio = 0.0;
        bool finite = true;
        for (const double N : N_list) {
            double C = 0.0;
            for (const auto& [x, y] : sample_pairs) {
                const double d = geometry.distance(x, y);
                const double poly = std::pow(1.0 + std::pow(N, delta) * d, M0);
                for (int dir = 0; dir < 2; ++dir) {
                    const Complex p = dir ? y : x;
                    const Complex q = dir ? x : y;
                    const double ratio = m.value(p, N) / m.value(q, N);
                    if (!std::isfinite(ratio)) { // overflowing weight: no certificate
                        finite = false;
                        worst_x = p;
                        worst_y = q;
                        worst_ratio = std::numeric_limits<double>::infinity();
                        continue;
                    }
                    const double c = ratio / poly;
                    if (c > C) {
                        C = c;
                        worst_x = p;
                        worst_y = q;
                        worst_ratio = ratio;
                    }
                }
            }
            C_per_N.push_back(C);
        }
        double prior = 0.0;
        for (std::size_t i = 0; i + 1 < C_per_N.size(); ++i) prior = std::max(prior, C_per_N[i]);
        const bool stable =
            finite && (C_per_N.back() <= 1.1 * prior || C_per_N.back() < 1e-12);
        if (stable) {
            cert.certified = true;
            cert.M0 = M0;
            cert.C = *std::max_element(C_per_N.begin(), C_per_N.end());
            return cert;
        }
        if (M0 == M0_max) {
            cert.witness_x = worst_x;
            cert.witness_y = worst_y;
            cert.witness_N = N_list.back();
            cert.witness_ratio = worst_ratio;
        }
    }
    return cert;
}

SymbolClassCertificate check_symbol_class(
    const Symbol& f, const OrderFunction& m, const ModelGeometry& geometry,
    std::span<const double> N_list, int max_alpha,
    std::span<const Complex> grid) {
    (void)geometry;
    if (N_list.size() < 2) throw ConfigError("check_symbol_class: need at least 2 N values");
    if (max_alpha > f.max_derivative_order)
        throw DerivativeOrderError("check_symbol_class: max_alpha exceeds materialized order");
    SymbolClassCertificate cert;
    cert.certified = true;
    const double delta = f.delta;
    for (int a = 0; a <= max_alpha; ++a) {
        for (int b = 0; a + b <= max_alpha; ++b) {
            const SymbolExpr deriv = differentiate(f.expr, a, b);
            std::vector<double> C_per_N;
            for (const double N : N_list) {
                const double scale = std::pow(N, f.power) / std::pow(N, delta * (a + b));
                double C = 0.0;
                for (const Complex zpt : grid) {
                    const double denom = m.value(zpt, N);
                    const double v = scale * std::abs(deriv.eval(zpt)) / denom;
                    C = std::max(C, v);
                }
                C_per_N.push_back(C);
            }
            const double top = C_per_N.back();
            const double second = C_per_N[C_per_N.size() - 2];
            const bool stable = top <= 1.1 * second || top < 1e-12;
            cert.C_alpha[{a, b}] = *std::max_element(C_per_N.begin(), C_per_N.end());
            if (!stable && cert.certified) {
                cert.certified = false;
                cert.violation_alpha = {a, b};
                cert.violation_growth = second > 0.0 ? top / second : 0.0;
            }
        }
    }
    return cert;
}

} // namespace btq
