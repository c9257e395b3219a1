"""lakemerge: integrate data-lake tables end to end.

Learn pairwise tuple integrability with a self-supervised attention matcher,
group tuples into integrable sets over the judgment graph, and resolve
multi-tuple value conflicts into one comprehensive table.
"""

__version__ = "0.1.0"
