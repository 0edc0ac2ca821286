"""Build crates/core/tests/fixtures/worked_example_traces.csv.

Two 100 x 30 accuracy matrices whose per-epoch medians and IQRs follow the
anchor points below, with a tail shape tuned so the Fligner-Killeen p-value at
the comparison epochs is about 3.5e-4.
"""
import sys

import numpy as np
from scipy import stats
from scipy.optimize import brentq
N=100; E=30
def type7(v):
    return np.percentile(v,75)-np.percentile(v,25)
def interp(points):
    xs=sorted(points); ep=np.arange(1,E+1)
    return np.interp(ep,[p for p in xs],[points[p] for p in xs])
P_med=interp({1:0.25,12:0.395,13:0.401,29:0.4685,30:0.47})
Q_med=interp({1:0.27,6:0.398,7:0.405,17:0.468,18:0.472,25:0.499,26:0.502,30:0.51})
P_iqr=interp({1:0.040,13:0.029,30:0.037})
Q_iqr=interp({1:0.021,7:0.019,18:0.023,26:0.023,30:0.022})
def shape(t):
    # standardized sample: normal quantiles blended with a heavier tail, median 0, type-7 IQR 1
    p=(np.arange(N)+0.5)/N
    z=stats.norm.ppf(p)
    z=np.sign(z)*np.abs(z)**t
    z=z-np.median(z); z=z/type7(z); return z
def build(t):
    rng=np.random.RandomState(20240611)
    arms={}
    for name,med,iqr in [('q',Q_med,Q_iqr),('p',P_med,P_iqr)]:
        M=np.zeros((N,E))
        for e in range(E):
            v=np.round(med[e]+iqr[e]*shape(t),4)
            M[:,e]=v[rng.permutation(N)]
        arms[name]=M
    return arms
def fk(t):
    a=build(t); return stats.fligner(a['q'][:,17],a['p'][:,29],center='median').pvalue
for t in [0.6,0.8,1.0,1.2,1.5]:
    print(t, fk(t))
t=brentq(lambda t: np.log(fk(t))-np.log(3.5e-4),1.0,1.3,xtol=1e-4)
t=round(t,3); print('t',t,'p',fk(t))
a=build(t)
for name in 'qp':
    M=a[name]; med=np.median(M,axis=0); iq=[type7(M[:,e]) for e in range(E)]
    print(name,'med',np.round(med,4)); print(name,'iqr',np.round(iq,4))
def first(med,A):
    idx=np.nonzero(med>=A)[0]; return idx[0]+1 if len(idx) else E+1
mq=np.median(a['q'],axis=0); mp_=np.median(a['p'],axis=0)
for A in [0.2,0.4,0.5]:
    eq,ep=first(mq,A),first(mp_,A); print(A,eq,ep,(eq+4-ep)/ep*100)
Am=min(mq.max(),mp_.max()); eq,ep=first(mq,Am),first(mp_,Am)
print('Am',Am,eq,ep,(eq+4-ep)/ep*100, type7(a['q'][:,eq-1])-type7(a['p'][:,ep-1]))
print('U less', stats.mannwhitneyu(a['p'][:,29],a['q'][:,np.argmax(mq)],alternative='less').pvalue)
with open(sys.argv[1] if len(sys.argv) > 1 else 'crates/core/tests/fixtures/worked_example_traces.csv','w') as f:
    f.write('arm,repetition,epoch,accuracy\n')
    for name in 'qp':
        for r in range(N):
            for e in range(E):
                f.write(f'{name},{r},{e+1},{a[name][r,e]:.4f}\n')
