from hypothesis import settings

# derandomize so repeated suite runs exercise identical examples
settings.register_profile("repeatable", derandomize=True, deadline=None)
settings.load_profile("repeatable")
