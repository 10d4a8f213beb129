#!/usr/bin/env python3
"""Arbitrary-precision oracle for the frozen expected values in the C++ tests.

Run:  python3 tests/oracle/gen_expected.py
Each value below is evaluated with mpmath at 60 decimal digits and printed
rounded to the nearest double (17 significant digits). The C++ tests freeze
these doubles; rerun this script if a fixture ever needs to change.
"""
import mpmath as mp

mp.mp.dps = 60

def S(z):
    return 1 / (1 + mp.exp(-z))

def logit(y):
    return mp.log(y / (1 - y))

def d(x):  # round to nearest double, print with 17 sig digits
    return float(x)

print("== sigmoid ==")
print("sigmoid(10)        = %.17g" % d(S(10)))
print("sigmoid(-100)      = %.17g" % d(S(-100)))
print("sigmoid(-50)       = %.17g" % d(S(-50)))
print("reverse_sigmoid(0.8) = %.17g" % d(logit(mp.mpf('0.8'))))

print("== rs_noise ==")
# r(y) = S(gamma * logit(y)) - 1/2
r_09_g02 = S(mp.mpf('0.2') * logit(mp.mpf('0.9'))) - mp.mpf('0.5')
print("rs_noise(0.9, 0.2) = %.17g" % d(r_09_g02))

print("== rs_defend([0.9,0.1], gamma=0.2, beta=1.0) ==")
y = [mp.mpf('0.9'), mp.mpf('0.1')]
beta = mp.mpf(1)
r = [S(mp.mpf('0.2') * logit(v)) - mp.mpf('0.5') for v in y]
pert = [y[i] - beta * r[i] for i in range(2)]
ssum = sum(pert)
out = [p / ssum for p in pert]
print("pre-normalize      = [%.17g, %.17g], sum=%.17g" % (d(pert[0]), d(pert[1]), d(ssum)))
print("rs_defend result   = [%.17g, %.17g]" % (d(out[0]), d(out[1])))

print("== soft cross entropy ==")
ce = mp.mpf('0.7') * (-mp.log(mp.mpf('0.6'))) + mp.mpf('0.3') * (-mp.log(mp.mpf('0.4')))
print("ce([.7,.3],[.6,.4]) = %.17g" % d(ce))
print("ln2                 = %.17g" % d(mp.log(2)))

print("== forward fixture 2-2-2 ==")
# x=[1,2]; W1=[[0.5,-0.25],[0.75,1.0]] b1=[0.1,-0.2]; relu; W2=[[1.0,-1.0],[0.5,0.25]] b2=[0.0,0.3]; softmax
x = [mp.mpf(1), mp.mpf(2)]
h = [mp.mpf('0.5')*x[0] + mp.mpf('-0.25')*x[1] + mp.mpf('0.1'),
     mp.mpf('0.75')*x[0] + mp.mpf('1.0')*x[1] + mp.mpf('-0.2')]
h = [max(v, mp.mpf(0)) for v in h]
z = [mp.mpf('1.0')*h[0] + mp.mpf('-1.0')*h[1] + mp.mpf('0.0'),
     mp.mpf('0.5')*h[0] + mp.mpf('0.25')*h[1] + mp.mpf('0.3')]
m = max(z)
e = [mp.exp(v - m) for v in z]
tot = sum(e)
p = [v / tot for v in e]
print("hidden  = [%.17g, %.17g]" % (d(h[0]), d(h[1])))
print("logits  = [%.17g, %.17g]" % (d(z[0]), d(z[1])))
print("posterior = [%.17g, %.17g]" % (d(p[0]), d(p[1])))

print("== detector margins ==")
print("S(10)   = %.17g" % d(S(10)))
print("S(-10)  = %.17g" % d(S(-10)))
print("S(-20)  = %.17g" % d(S(-20)))
